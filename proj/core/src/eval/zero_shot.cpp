// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "dropclip/eval/zero_shot.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "dropclip/model/patchify.hpp"
#include "dropclip/util/parallel.hpp"

namespace dropclip::eval {

namespace nx = numerics;

namespace {

nx::Tensor<float> stack_rows(std::vector<nx::Tensor<float>> parts) {
  return parts.size() == 1 ? parts[0] : nx::concat(parts, 0);
}

}  // namespace

nx::Tensor<float> embed_videos(const model::ParamTree<float>& params, const model::ModelConfig& config,
                               std::span<const synthdata::VideoClip> clips) {
  if (clips.empty()) throw std::invalid_argument("embed_videos: no clips");
  std::vector<std::size_t> all(config.num_patches());
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<nx::Tensor<float>> parts((clips.size() + kEvalChunk - 1) / kEvalChunk);
  util::parallel_for(parts.size(), [&](std::size_t c) {
    nx::NoGradScope<float> no_grad;
    const auto begin = c * kEvalChunk;
    const auto end = std::min(clips.size(), begin + kEvalChunk);
    std::vector<masking::KeptPatches<float>> videos;
    for (std::size_t i = begin; i < end; ++i) {
      videos.push_back({model::patchify<float>(clips[i], config.patch_size).tokens, all});
    }
    const auto f = model::encode_video(params, config, std::span<const masking::KeptPatches<float>>(videos));
    parts[c] = nx::l2_normalize(f.pooled);
  });
  return stack_rows(std::move(parts));
}

nx::Tensor<float> embed_texts(const model::ParamTree<float>& params, const model::ModelConfig& config,
                              std::span<const synthdata::TokenizedText> texts) {
  if (texts.empty()) throw std::invalid_argument("embed_texts: no texts");
  std::vector<nx::Tensor<float>> parts((texts.size() + kEvalChunk - 1) / kEvalChunk);
  util::parallel_for(parts.size(), [&](std::size_t c) {
    nx::NoGradScope<float> no_grad;
    const auto begin = c * kEvalChunk;
    const auto end = std::min(texts.size(), begin + kEvalChunk);
    const auto f = model::encode_text(params, config, texts.subspan(begin, end - begin));
    parts[c] = nx::l2_normalize(f.pooled);
  });
  return stack_rows(std::move(parts));
}

std::size_t choose(std::span<const double> scores) {
  if (scores.size() < 2) throw std::invalid_argument("multiple choice needs at least 2 candidates");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

std::size_t multiple_choice(const model::ParamTree<float>& params, const model::ModelConfig& config,
                            const synthdata::VideoClip& clip,
                            std::span<const synthdata::TokenizedText> candidates) {
  if (candidates.size() < 2) throw std::invalid_argument("multiple choice needs at least 2 candidates");
  const auto v = embed_videos(params, config, std::span<const synthdata::VideoClip>(&clip, 1));
  const auto t = embed_texts(params, config, candidates);
  const auto p = v.dim(1);
  std::vector<double> scores(candidates.size(), 0.0);
  for (std::size_t j = 0; j < scores.size(); ++j) {
    for (std::size_t k = 0; k < p; ++k) scores[j] += static_cast<double>(v.data()[k]) * t.data()[j * p + k];
  }
  return choose(scores);
}

std::string fill_template(const std::string& prompt, const std::string& name) {
  const auto at = prompt.find("{}");
  if (at == std::string::npos) throw std::invalid_argument("prompt template '" + prompt + "' lacks a {} placeholder");
  return prompt.substr(0, at) + name + prompt.substr(at + 2);
}

std::size_t classify_embedded(std::span<const float> video, const nx::Tensor<float>& class_embeddings,
                              std::size_t classes) {
  if (classes == 0 || class_embeddings.dim(0) % classes != 0) {
    throw std::invalid_argument("classify: class embeddings do not divide into " + std::to_string(classes) + " classes");
  }
  const auto templates = class_embeddings.dim(0) / classes;
  const auto p = class_embeddings.dim(1);
  if (video.size() != p) throw nx::ShapeError("classify: video feature width mismatch");
  const auto d = class_embeddings.data();
  std::vector<double> mean(classes, 0.0);
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t t = 0; t < templates; ++t) {
      double s = 0.0;
      for (std::size_t k = 0; k < p; ++k) s += static_cast<double>(video[k]) * d[(c * templates + t) * p + k];
      mean[c] += s;
    }
    mean[c] /= static_cast<double>(templates);
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < classes; ++c) {
    if (mean[c] > mean[best]) best = c;
  }
  return best;
}

nx::Tensor<float> embed_prompts(const model::ParamTree<float>& params, const model::ModelConfig& config,
                                const synthdata::Tokenizer& tokenizer, std::span<const std::string> class_names,
                                std::span<const std::string> templates) {
  if (templates.empty()) throw std::invalid_argument("classify: no prompt templates");
  if (class_names.empty()) throw std::invalid_argument("classify: no classes");
  std::vector<synthdata::TokenizedText> prompts;
  for (const auto& name : class_names) {
    for (const auto& t : templates) prompts.push_back(tokenizer.tokenize(fill_template(t, name)));
  }
  return embed_texts(params, config, prompts);
}

std::size_t zero_shot_classify(const model::ParamTree<float>& params, const model::ModelConfig& config,
                               const synthdata::Tokenizer& tokenizer, const synthdata::VideoClip& clip,
                               std::span<const std::string> class_names,
                               std::span<const std::string> templates) {
  const auto text = embed_prompts(params, config, tokenizer, class_names, templates);
  const auto v = embed_videos(params, config, std::span<const synthdata::VideoClip>(&clip, 1));
  return classify_embedded(v.data(), text, class_names.size());
}

}  // namespace dropclip::eval
