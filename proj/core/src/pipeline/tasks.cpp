// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "dropclip/pipeline/tasks.hpp"

#include <algorithm>
#include <array>
#include <tuple>
#include <stdexcept>

#include "dropclip/eval/retrieval.hpp"
#include "dropclip/eval/zero_shot.hpp"
#include "dropclip/util/kv_file.hpp"

namespace dropclip::pipeline {

namespace sd = synthdata;

std::string_view name(EvalTask task) {
  switch (task) {
    case EvalTask::retrieval: return "retrieval";
    case EvalTask::multiple_choice: return "multiple-choice";
    case EvalTask::classify: return "classify";
    case EvalTask::vqa: return "vqa";
    case EvalTask::masked_tokens: return "masked-tokens";
  }
  return "?";
}

EvalTask parse_eval_task(std::string_view text) {
  for (auto t : {EvalTask::retrieval, EvalTask::multiple_choice, EvalTask::classify, EvalTask::vqa,
                 EvalTask::masked_tokens}) {
    if (text == name(t)) return t;
  }
  throw std::invalid_argument("unknown eval task '" + std::string(text) + "'");
}

std::string EvalReport::text() const {
  std::string out = title + "\n\n" + table.text();
  if (!metrics.empty()) out += "\n";
  for (const auto& [k, v] : metrics) out += k + ": " + eval::fixed(v, 2) + "\n";
  return out;
}

std::string EvalReport::records() const {
  std::string out = table.records();
  for (const auto& [k, v] : metrics) out += "metric=" + k + " value=" + util::format_double(v) + "\n";
  return out;
}

double EvalReport::metric(std::string_view key) const {
  for (const auto& [k, v] : metrics) {
    if (k == key) return v;
  }
  throw std::out_of_range("report has no metric '" + std::string(key) + "'");
}

const std::vector<std::string>& direction_templates() {
  static const std::vector<std::string> t{"moving {}", "a shape moving {}", "it is moving {}"};
  return t;
}

namespace {

std::string pct(double v) { return eval::fixed(v, 2); }

sd::Tokenizer tokenizer_for(const model::ModelConfig& config, const sd::DatasetManifest& m) {
  sd::Tokenizer tok(m.vocabulary, config.max_text_len);
  if (m.vocabulary.size() != config.vocab_size) {
    throw std::invalid_argument("eval: manifest vocabulary has " + std::to_string(m.vocabulary.size()) +
                                " ids; checkpoint expects " + std::to_string(config.vocab_size));
  }
  return tok;
}

void check_geometry(const model::ModelConfig& config, const sd::DatasetManifest& m) {
  if (m.frames != config.frames || m.height != config.height || m.width != config.width) {
    throw std::invalid_argument("eval: split clips are " + std::to_string(m.frames) + "x" + std::to_string(m.height) +
                                "x" + std::to_string(m.width) + "; checkpoint expects " +
                                std::to_string(config.frames) + "x" + std::to_string(config.height) + "x" +
                                std::to_string(config.width));
  }
}

EvalReport retrieval(const model::ParamTree<float>& params, const model::ModelConfig& config,
                     const EvalRequest& r) {
  const auto tok = tokenizer_for(config, r.split);
  std::vector<sd::VideoClip> clips;
  std::vector<sd::TokenizedText> texts;
  for (std::size_t i = 0; i < r.split.count; ++i) {
    auto s = sd::gen_sample(r.split, i);
    clips.push_back(std::move(s.clip));
    texts.push_back(tok.tokenize(s.caption));
  }
  const auto v = eval::embed_videos(params, config, clips);
  const auto t = eval::embed_texts(params, config, texts);
  EvalReport out{"retrieval on " + r.split.split + " (" + std::to_string(r.split.count) + " pairs)",
                 eval::Table({"direction", "R@1", "R@5", "R@10", "MdR"}),
                 {}};
  for (const auto& [dir, q, c] : {std::tuple{"t2v", &t, &v}, std::tuple{"v2t", &v, &t}}) {
    const auto res = eval::retrieval_eval(eval::similarity(*q, *c));
    out.table.add_row({dir, pct(res.r1), pct(res.r5), pct(res.r10), eval::fixed(res.median_rank, 1)});
    const std::string k(dir);
    out.metrics.push_back({k + ".r1", res.r1});
    out.metrics.push_back({k + ".r5", res.r5});
    out.metrics.push_back({k + ".r10", res.r10});
    out.metrics.push_back({k + ".mdr", res.median_rank});
  }
  return out;
}

EvalReport multiple_choice(const model::ParamTree<float>& params, const model::ModelConfig& config,
                           const EvalRequest& r) {
  if (r.split.style != sd::CaptionStyle::motion) {
    throw std::invalid_argument("multiple-choice: needs a motion split");
  }
  if (r.choices.size() < 2) throw std::invalid_argument("multiple-choice: needs at least two directions");
  const auto tok = tokenizer_for(config, r.split);
  std::string label;
  for (auto m : r.choices) label += (label.empty() ? "" : "/") + std::string(sd::name(m));

  std::vector<std::size_t> per_truth(r.choices.size(), 0), hit_truth(r.choices.size(), 0);
  std::size_t n = 0, hits = 0;
  for (std::size_t i = 0; i < r.split.count && (r.limit == 0 || n < r.limit); ++i) {
    const auto s = sd::gen_sample(r.split, i);
    const auto truth = std::find(r.choices.begin(), r.choices.end(), s.scene.motion);
    if (truth == r.choices.end()) continue;
    std::vector<sd::TokenizedText> candidates;
    for (auto m : r.choices) candidates.push_back(tok.tokenize(sd::motion_caption(s.scene.shape, s.scene.color, m)));
    const auto want = static_cast<std::size_t>(truth - r.choices.begin());
    const bool ok = eval::multiple_choice(params, config, s.clip, candidates) == want;
    ++n;
    ++per_truth[want];
    hits += ok;
    hit_truth[want] += ok;
  }
  if (n == 0) throw std::invalid_argument("multiple-choice: no clip in the split moves " + label);
  EvalReport out{"multiple choice " + label + " on " + r.split.split + " (" + std::to_string(n) + " clips)",
                 eval::Table({"truth", "clips", "accuracy"}),
                 {}};
  for (std::size_t c = 0; c < r.choices.size(); ++c) {
    const double acc = per_truth[c] ? 100.0 * static_cast<double>(hit_truth[c]) / static_cast<double>(per_truth[c]) : 0.0;
    out.table.add_row({std::string(sd::name(r.choices[c])), std::to_string(per_truth[c]), pct(acc)});
  }
  const double acc = 100.0 * static_cast<double>(hits) / static_cast<double>(n);
  out.table.add_row({"all", std::to_string(n), pct(acc)});
  out.metrics.push_back({"accuracy", acc});
  out.metrics.push_back({"clips", static_cast<double>(n)});
  return out;
}

EvalReport classify(const model::ParamTree<float>& params, const model::ModelConfig& config, const EvalRequest& r) {
  if (r.split.style != sd::CaptionStyle::motion) throw std::invalid_argument("classify: needs a motion split");
  const auto tok = tokenizer_for(config, r.split);
  std::vector<std::string> classes;
  for (auto m : sd::kDirections) classes.emplace_back(sd::name(m));
  const auto prompts = eval::embed_prompts(params, config, tok, classes, direction_templates());

  std::vector<sd::VideoClip> clips;
  std::vector<std::size_t> truth;
  for (std::size_t i = 0; i < r.split.count; ++i) {
    auto s = sd::gen_sample(r.split, i);
    const auto it = std::find(sd::kDirections.begin(), sd::kDirections.end(), s.scene.motion);
    if (it == sd::kDirections.end()) continue;
    clips.push_back(std::move(s.clip));
    truth.push_back(static_cast<std::size_t>(it - sd::kDirections.begin()));
  }
  if (clips.empty()) throw std::invalid_argument("classify: split has no moving clips");
  const auto v = eval::embed_videos(params, config, clips);
  const auto p = v.dim(1);
  std::vector<std::size_t> count(classes.size(), 0), hit(classes.size(), 0);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const auto pred = eval::classify_embedded(v.data().subspan(i * p, p), prompts, classes.size());
    ++count[truth[i]];
    hit[truth[i]] += pred == truth[i];
    hits += pred == truth[i];
  }
  EvalReport out{"zero-shot direction classification on " + r.split.split + " (" + std::to_string(clips.size()) +
                     " clips, " + std::to_string(direction_templates().size()) + " templates)",
                 eval::Table({"class", "clips", "accuracy"}),
                 {}};
  for (std::size_t c = 0; c < classes.size(); ++c) {
    out.table.add_row({classes[c], std::to_string(count[c]),
                       pct(count[c] ? 100.0 * static_cast<double>(hit[c]) / static_cast<double>(count[c]) : 0.0)});
  }
  const double acc = 100.0 * static_cast<double>(hits) / static_cast<double>(clips.size());
  out.table.add_row({"all", std::to_string(clips.size()), pct(acc)});
  out.metrics.push_back({"accuracy", acc});
  return out;
}

EvalReport vqa(const model::ParamTree<float>& params, const model::ModelConfig& config, const EvalRequest& r) {
  if (!r.reference) throw std::invalid_argument("vqa: needs a training split for the answer head");
  if (r.seeds.empty()) throw std::invalid_argument("vqa: needs at least one seed");
  check_geometry(config, *r.reference);
  EvalReport out{"vqa (" + std::string(eval::name(r.mode)) + " features) trained on " + r.reference->split + " (" +
                     std::to_string(r.reference->count) + " clips), tested on " + r.split.split + " (" +
                     std::to_string(r.split.count) + " clips)",
                 eval::Table({"seed", "accuracy", "color", "shape", "direction"}),
                 {}};
  std::array<double, 4> mean{};
  for (auto seed : r.seeds) {
    eval::VqaHeadConfig head;
    head.seed = seed;
    const auto res = eval::vqa_train_eval(params, config, *r.reference, r.split, r.mode, head);
    out.table.add_row({std::to_string(seed), pct(res.accuracy), pct(res.per_type[0]), pct(res.per_type[1]),
                       pct(res.per_type[2])});
    mean[0] += res.accuracy;
    for (std::size_t t = 0; t < 3; ++t) mean[t + 1] += res.per_type[t];
    out.metrics.push_back({"seed" + std::to_string(seed) + ".direction", res.per_type[2]});
  }
  for (auto& m : mean) m /= static_cast<double>(r.seeds.size());
  out.table.add_row({"mean", pct(mean[0]), pct(mean[1]), pct(mean[2]), pct(mean[3])});
  out.metrics.push_back({"accuracy", mean[0]});
  out.metrics.push_back({"color", mean[1]});
  out.metrics.push_back({"shape", mean[2]});
  out.metrics.push_back({"direction", mean[3]});
  return out;
}

EvalReport masked_tokens(const model::ParamTree<float>& params, const model::ModelConfig& config,
                         const EvalRequest& r) {
  if (!r.reference) throw std::invalid_argument("masked-tokens: needs a prior corpus split");
  const auto res = eval::masked_token_accuracy(params, config, r.split, *r.reference, r.mask_ratio, r.seed);
  const auto tok = tokenizer_for(config, r.split);
  EvalReport out{"masked-token prediction on " + r.split.split + " (" + std::to_string(r.split.count) +
                     " captions, mask ratio " + eval::fixed(r.mask_ratio, 2) + ")",
                 eval::Table({"predictor", "targets", "accuracy"}),
                 {}};
  out.table.add_row({"decoder", std::to_string(res.targets), pct(res.accuracy)});
  out.table.add_row({"prior(" + tok.vocabulary().word(res.prior_word) + ")", std::to_string(res.targets),
                     pct(res.prior_accuracy)});
  out.metrics.push_back({"accuracy", res.accuracy});
  out.metrics.push_back({"prior", res.prior_accuracy});
  out.metrics.push_back({"margin", res.accuracy - res.prior_accuracy});
  return out;
}

}  // namespace

EvalReport run_eval(const model::ParamTree<float>& params, const model::ModelConfig& config,
                    const EvalRequest& request) {
  config.validate();
  request.split.validate();
  check_geometry(config, request.split);
  if (request.task == EvalTask::multiple_choice) return multiple_choice(params, config, request);
  // Elsewhere the limit keeps the first samples; generation depends only on the index.
  EvalRequest r = request;
  if (r.limit > 0) r.split.count = std::min(r.split.count, r.limit);
  switch (r.task) {
    case EvalTask::retrieval: return retrieval(params, config, r);
    case EvalTask::multiple_choice: break;
    case EvalTask::classify: return classify(params, config, r);
    case EvalTask::vqa: return vqa(params, config, r);
    case EvalTask::masked_tokens: return masked_tokens(params, config, r);
  }
  throw std::invalid_argument("unknown eval task");
}

}  // namespace dropclip::pipeline
