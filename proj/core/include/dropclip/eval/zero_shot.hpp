// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dropclip/model/model.hpp"
#include "dropclip/synthdata/scene.hpp"
#include "dropclip/synthdata/tokenizer.hpp"

namespace dropclip::eval {

/// Every eval forward keeps all patches and records nothing on any tape.
inline constexpr std::size_t kEvalChunk = 32;

/// Unit-norm pooled video features, (N, proj_dim).
numerics::Tensor<float> embed_videos(const model::ParamTree<float>& params, const model::ModelConfig& config,
                                     std::span<const synthdata::VideoClip> clips);

/// Unit-norm pooled text features, (N, proj_dim).
numerics::Tensor<float> embed_texts(const model::ParamTree<float>& params, const model::ModelConfig& config,
                                    std::span<const synthdata::TokenizedText> texts);

/// Index of the highest score; ties go to the lowest index. Needs >= 2 scores.
std::size_t choose(std::span<const double> scores);

/// Picks the caption whose pooled feature is most similar to the video's.
std::size_t multiple_choice(const model::ParamTree<float>& params, const model::ModelConfig& config,
                            const synthdata::VideoClip& clip,
                            std::span<const synthdata::TokenizedText> candidates);

/// Substitutes `name` for the single "{}" in `prompt`.
std::string fill_template(const std::string& prompt, const std::string& name);

/// Per class, the mean over templates of video-text similarity; argmax.
/// `class_embeddings` is (classes * templates, P), class-major.
std::size_t classify_embedded(std::span<const float> video, const numerics::Tensor<float>& class_embeddings,
                              std::size_t classes);

/// Text side of zero-shot classification: every prompt of every class.
numerics::Tensor<float> embed_prompts(const model::ParamTree<float>& params, const model::ModelConfig& config,
                                      const synthdata::Tokenizer& tokenizer,
                                      std::span<const std::string> class_names,
                                      std::span<const std::string> templates);

std::size_t zero_shot_classify(const model::ParamTree<float>& params, const model::ModelConfig& config,
                               const synthdata::Tokenizer& tokenizer, const synthdata::VideoClip& clip,
                               std::span<const std::string> class_names,
                               std::span<const std::string> templates);

}  // namespace dropclip::eval
