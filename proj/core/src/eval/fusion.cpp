// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "dropclip/eval/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "dropclip/eval/zero_shot.hpp"
#include "dropclip/masking/masking.hpp"
#include "dropclip/model/patchify.hpp"
#include "dropclip/train/objectives.hpp"
#include "dropclip/train/optimizer.hpp"

namespace dropclip::eval {

namespace nx = numerics;

std::string_view name(VqaFeatureMode mode) {
  switch (mode) {
    case VqaFeatureMode::alignment: return "alignment";
    case VqaFeatureMode::fusion: return "fusion";
    case VqaFeatureMode::combined: return "combined";
  }
  return "?";
}

VqaFeatureMode parse_vqa_mode(std::string_view text) {
  if (text == "alignment") return VqaFeatureMode::alignment;
  if (text == "fusion") return VqaFeatureMode::fusion;
  if (text == "combined") return VqaFeatureMode::combined;
  throw std::invalid_argument("unknown vqa mode '" + std::string(text) + "' (expected alignment, fusion or combined)");
}

std::size_t vqa_feature_dim(const model::ModelConfig& config, VqaFeatureMode mode) {
  switch (mode) {
    case VqaFeatureMode::alignment: return 2 * config.proj_dim;
    case VqaFeatureMode::fusion: return config.decoder_dim;
    case VqaFeatureMode::combined: return 2 * config.proj_dim + config.decoder_dim;
  }
  return 0;
}

std::string_view name(QuestionType type) {
  switch (type) {
    case QuestionType::color: return "color";
    case QuestionType::shape: return "shape";
    case QuestionType::direction: return "direction";
  }
  return "?";
}

std::string_view question_text(QuestionType type) {
  switch (type) {
    case QuestionType::color: return "what color is the shape";
    case QuestionType::shape: return "what shape is it";
    case QuestionType::direction: return "which direction is it moving";
  }
  return "";
}

const std::vector<std::string>& answer_vocabulary() {
  static const std::vector<std::string> answers = [] {
    std::vector<std::string> a;
    for (auto c : synthdata::kAllColors) a.emplace_back(synthdata::name(c));
    for (auto s : synthdata::kAllShapes) a.emplace_back(synthdata::name(s));
    for (auto m : synthdata::kDirections) a.emplace_back(synthdata::name(m));
    a.emplace_back("still");
    return a;
  }();
  return answers;
}

std::size_t answer_id(std::string_view answer) {
  const auto& a = answer_vocabulary();
  const auto it = std::find(a.begin(), a.end(), answer);
  if (it == a.end()) throw std::invalid_argument("answer '" + std::string(answer) + "' is outside the answer vocabulary");
  return static_cast<std::size_t>(it - a.begin());
}

std::vector<QaItem> make_qa(const synthdata::DatasetManifest& manifest) {
  if (manifest.style != synthdata::CaptionStyle::motion) {
    throw std::invalid_argument("make_qa: question answering needs a motion manifest");
  }
  std::vector<QaItem> out;
  out.reserve(3 * manifest.count);
  for (std::size_t i = 0; i < manifest.count; ++i) {
    const auto s = synthdata::gen_sample(manifest, i);
    out.push_back({i, QuestionType::color, answer_id(synthdata::name(s.scene.color))});
    out.push_back({i, QuestionType::shape, answer_id(synthdata::name(s.scene.shape))});
    out.push_back({i, QuestionType::direction,
                   answer_id(s.scene.motion == synthdata::Motion::none ? "still" : synthdata::name(s.scene.motion))});
  }
  return out;
}

nx::Tensor<float> vqa_features(const model::ParamTree<float>& params, const model::ModelConfig& config,
                               VqaFeatureMode mode, std::span<const synthdata::VideoClip> clips,
                               std::span<const synthdata::TokenizedText> questions) {
  if (clips.size() != questions.size() || clips.empty()) {
    throw std::invalid_argument("vqa_features: need one question per clip");
  }
  if (mode != VqaFeatureMode::alignment && !config.with_decoder) {
    throw std::invalid_argument("vqa_features: " + std::string(name(mode)) +
                                " features need a checkpoint trained with the decoder");
  }
  nx::NoGradScope<float> no_grad;
  std::vector<std::size_t> all(config.num_patches());
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<nx::Tensor<float>> parts;
  for (std::size_t begin = 0; begin < clips.size(); begin += kEvalChunk) {
    const auto end = std::min(clips.size(), begin + kEvalChunk);
    std::vector<masking::KeptPatches<float>> videos;
    std::vector<std::size_t> eos_rows;
    for (std::size_t i = begin; i < end; ++i) {
      videos.push_back({model::patchify<float>(clips[i], config.patch_size).tokens, all});
      eos_rows.push_back((i - begin) * config.max_text_len + questions[i].eos_position());
    }
    const auto vf = model::encode_video(params, config, std::span<const masking::KeptPatches<float>>(videos));
    const auto tf = model::encode_text(params, config, questions.subspan(begin, end - begin));
    std::vector<nx::Tensor<float>> cols;
    if (mode != VqaFeatureMode::fusion) {
      cols.push_back(nx::l2_normalize(vf.pooled));
      cols.push_back(nx::l2_normalize(tf.pooled));
    }
    if (mode != VqaFeatureMode::alignment) {
      const auto hidden = model::decode_hidden(params, config, tf, vf);
      cols.push_back(nx::gather(hidden, std::span<const std::size_t>(eos_rows)));
    }
    parts.push_back(cols.size() == 1 ? cols[0] : nx::concat(cols, 1));
  }
  return parts.size() == 1 ? parts[0] : nx::concat(parts, 0);
}

namespace {

nx::Tensor<float> features_for(const model::ParamTree<float>& params, const model::ModelConfig& config,
                               const synthdata::DatasetManifest& manifest, const std::vector<QaItem>& items,
                               VqaFeatureMode mode) {
  const synthdata::Tokenizer tokenizer(manifest.vocabulary, config.max_text_len);
  std::vector<synthdata::VideoClip> clips;
  std::vector<synthdata::TokenizedText> questions;
  clips.reserve(items.size());
  for (const auto& q : items) {
    clips.push_back(synthdata::gen_sample(manifest, q.sample).clip);
    questions.push_back(tokenizer.tokenize(question_text(q.type)));
  }
  return vqa_features(params, config, mode, clips, questions);
}

// Column-wise standardisation with statistics from the training features.
void standardize(std::vector<float>& train, std::vector<float>& test, std::size_t dim) {
  const auto n = train.size() / dim;
  for (std::size_t c = 0; c < dim; ++c) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += train[r * dim + c];
    mean /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) sq += (train[r * dim + c] - mean) * (train[r * dim + c] - mean);
    const double sd = std::sqrt(sq / static_cast<double>(n)) + 1e-6;
    for (std::size_t r = 0; r < n; ++r) train[r * dim + c] = static_cast<float>((train[r * dim + c] - mean) / sd);
    for (std::size_t r = 0; r < test.size() / dim; ++r) {
      test[r * dim + c] = static_cast<float>((test[r * dim + c] - mean) / sd);
    }
  }
}

}  // namespace

VqaResult vqa_train_eval(const model::ParamTree<float>& params, const model::ModelConfig& config,
                         const synthdata::DatasetManifest& train, const synthdata::DatasetManifest& test,
                         VqaFeatureMode mode, const VqaHeadConfig& head) {
  const auto train_items = make_qa(train);
  const auto test_items = make_qa(test);
  const auto dim = vqa_feature_dim(config, mode);
  const auto ftrain = features_for(params, config, train, train_items, mode);
  const auto ftest = features_for(params, config, test, test_items, mode);
  std::vector<float> xtr(ftrain.data().begin(), ftrain.data().end());
  std::vector<float> xte(ftest.data().begin(), ftest.data().end());
  standardize(xtr, xte, dim);

  const std::size_t classes = answer_vocabulary().size();
  model::ParamTree<float> mlp;
  util::Rng init(util::mix_seed(head.seed, util::fnv1a("vqa-head")));
  auto normal = [&](std::size_t n, double std) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(std * init.normal());
    return v;
  };
  mlp.add("w1", nx::Tensor<float>({dim, head.hidden}, normal(dim * head.hidden, std::sqrt(2.0 / dim))));
  mlp.add("b1", nx::Tensor<float>::zeros({head.hidden}));
  mlp.add("w2", nx::Tensor<float>({head.hidden, classes}, normal(head.hidden * classes, std::sqrt(1.0 / head.hidden))));
  mlp.add("b2", nx::Tensor<float>::zeros({classes}));
  auto forward = [&](const nx::Tensor<float>& x) {
    auto h = nx::gelu(nx::linear(x, mlp["w1"], mlp["b1"]));
    return nx::linear(h, mlp["w2"], mlp["b2"]);
  };

  train::AdamW opt(0.9, 0.999, 1e-8, 0.0);
  util::Rng order_rng(util::mix_seed(head.seed, util::fnv1a("vqa-order")));
  const auto n = train_items.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 0; epoch < head.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
    for (std::size_t begin = 0; begin < n; begin += head.batch_size) {
      const auto end = std::min(n, begin + head.batch_size);
      std::vector<float> xb;
      std::vector<std::size_t> yb;
      for (std::size_t i = begin; i < end; ++i) {
        const auto r = order[i];
        xb.insert(xb.end(), xtr.begin() + static_cast<std::ptrdiff_t>(r * dim),
                  xtr.begin() + static_cast<std::ptrdiff_t>((r + 1) * dim));
        yb.push_back(train_items[r].answer);
      }
      mlp.prepare_grads();
      nx::Tape<float> tape;
      {
        nx::TapeScope<float> scope(tape);
        const auto loss = nx::cross_entropy(forward(nx::Tensor<float>({end - begin, dim}, std::move(xb))),
                                            std::span<const std::size_t>(yb));
        tape.backward(loss);
      }
      opt.step(mlp, head.lr);
    }
  }
  mlp.zero_grads();
  for (auto& [_, e] : mlp.entries()) e.value.set_requires_grad(false);

  nx::NoGradScope<float> no_grad;
  const auto logits = forward(nx::Tensor<float>({test_items.size(), dim}, std::move(xte)));
  VqaResult out;
  std::array<std::size_t, 3> hits{};
  std::size_t total_hits = 0;
  for (std::size_t r = 0; r < test_items.size(); ++r) {
    const auto row = logits.data().subspan(r * classes, classes);
    const auto pred = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    const auto t = static_cast<std::size_t>(test_items[r].type);
    ++out.counts[t];
    if (pred == test_items[r].answer) {
      ++hits[t];
      ++total_hits;
    }
  }
  out.accuracy = 100.0 * static_cast<double>(total_hits) / static_cast<double>(test_items.size());
  for (std::size_t t = 0; t < 3; ++t) {
    out.per_type[t] = out.counts[t] == 0 ? 0.0 : 100.0 * static_cast<double>(hits[t]) / static_cast<double>(out.counts[t]);
  }
  return out;
}

MlmAccuracy masked_token_accuracy(const model::ParamTree<float>& params, const model::ModelConfig& config,
                                  const synthdata::DatasetManifest& heldout,
                                  const synthdata::DatasetManifest& prior_corpus, double mask_ratio,
                                  std::uint64_t seed) {
  if (!config.with_decoder) throw std::invalid_argument("masked-token accuracy needs a decoder");
  const synthdata::Tokenizer tokenizer(heldout.vocabulary, config.max_text_len);

  std::vector<std::size_t> counts(config.vocab_size, 0);
  for (std::size_t i = 0; i < prior_corpus.count; ++i) {
    for (auto id : tokenizer.tokenize(synthdata::gen_sample(prior_corpus, i).caption).ids) {
      if (id >= static_cast<std::int32_t>(synthdata::kNumSpecial)) ++counts[static_cast<std::size_t>(id)];
    }
  }
  MlmAccuracy out;
  out.prior_word = static_cast<std::int32_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());

  const masking::RngStreams streams(seed);
  std::vector<std::size_t> all(config.num_patches());
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::size_t hits = 0, prior_hits = 0;
  nx::NoGradScope<float> no_grad;
  for (std::size_t begin = 0; begin < heldout.count; begin += kEvalChunk) {
    const auto end = std::min(heldout.count, begin + kEvalChunk);
    std::vector<masking::KeptPatches<float>> videos;
    std::vector<masking::MaskedText> masked;
    std::vector<synthdata::TokenizedText> inputs;
    for (std::size_t i = begin; i < end; ++i) {
      const auto s = synthdata::gen_sample(heldout, i);
      videos.push_back({model::patchify<float>(s.clip, config.patch_size).tokens, all});
      auto rng = streams.stream(masking::RngStreams::kTextMask, 0, i);
      masked.push_back(masking::mask_text(tokenizer.tokenize(s.caption), mask_ratio, rng));
      inputs.push_back(masked.back().input);
    }
    const auto vf = model::encode_video(params, config, std::span<const masking::KeptPatches<float>>(videos));
    const auto tf = model::encode_text(params, config, std::span<const synthdata::TokenizedText>(inputs));
    const auto t = train::mask_targets(masked, config.max_text_len);
    const auto logits = model::vocab_logits(
        params, nx::gather(model::decode_hidden(params, config, tf, vf), std::span<const std::size_t>(t.rows)));
    const auto v = config.vocab_size;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const auto row = logits.data().subspan(r * v, v);
      const auto pred = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
      if (pred == t.ids[r]) ++hits;
      if (t.ids[r] == static_cast<std::size_t>(out.prior_word)) ++prior_hits;
    }
    out.targets += t.rows.size();
  }
  out.accuracy = 100.0 * static_cast<double>(hits) / static_cast<double>(out.targets);
  out.prior_accuracy = 100.0 * static_cast<double>(prior_hits) / static_cast<double>(out.targets);
  return out;
}

}  // namespace dropclip::eval
