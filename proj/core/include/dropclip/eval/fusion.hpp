// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dropclip/model/model.hpp"
#include "dropclip/synthdata/dataset.hpp"

namespace dropclip::eval {

/// alignment: [video pooled, text pooled] (2P); fusion: decoder state at the
/// question's first EOS (D_dec); combined: both (2P + D_dec).
enum class VqaFeatureMode : std::uint8_t { alignment, fusion, combined };

std::string_view name(VqaFeatureMode mode);
VqaFeatureMode parse_vqa_mode(std::string_view text);
std::size_t vqa_feature_dim(const model::ModelConfig& config, VqaFeatureMode mode);

enum class QuestionType : std::uint8_t { color, shape, direction };
inline constexpr std::array<QuestionType, 3> kQuestionTypes = {QuestionType::color, QuestionType::shape,
                                                               QuestionType::direction};
std::string_view name(QuestionType type);
std::string_view question_text(QuestionType type);

/// red green blue yellow square circle triangle left right up down still.
const std::vector<std::string>& answer_vocabulary();
std::size_t answer_id(std::string_view answer);

struct QaItem {
  std::size_t sample = 0;  // index into the manifest
  QuestionType type = QuestionType::color;
  std::size_t answer = 0;
};

/// Three questions (color, shape, direction) per sample.
std::vector<QaItem> make_qa(const synthdata::DatasetManifest& manifest);

/// Features for (clip, question) pairs, (N, vqa_feature_dim). Questions are
/// never masked. Fusion modes need a decoder.
numerics::Tensor<float> vqa_features(const model::ParamTree<float>& params, const model::ModelConfig& config,
                                     VqaFeatureMode mode, std::span<const synthdata::VideoClip> clips,
                                     std::span<const synthdata::TokenizedText> questions);

struct VqaHeadConfig {
  std::size_t hidden = 64;
  std::size_t epochs = 60;
  std::size_t batch_size = 64;
  double lr = 3e-3;
  std::uint64_t seed = 0;
};

struct VqaResult {
  double accuracy = 0.0;                 // percent
  std::array<double, 3> per_type{};      // percent, indexed by QuestionType
  std::array<std::size_t, 3> counts{};
};

/// Trains a two-layer MLP answer head on frozen features of `train` and
/// scores top-1 accuracy on `test`.
VqaResult vqa_train_eval(const model::ParamTree<float>& params, const model::ModelConfig& config,
                         const synthdata::DatasetManifest& train, const synthdata::DatasetManifest& test,
                         VqaFeatureMode mode, const VqaHeadConfig& head = {});

struct MlmAccuracy {
  double accuracy = 0.0;        // percent of masked positions predicted exactly
  double prior_accuracy = 0.0;  // percent for always predicting the prior word
  std::int32_t prior_word = 0;  // most frequent maskable word in the prior corpus
  std::size_t targets = 0;
};

/// Masks every held-out caption (stream "text-mask" of `seed`, key (0, i)) and
/// predicts the originals from the full, undropped video.
MlmAccuracy masked_token_accuracy(const model::ParamTree<float>& params, const model::ModelConfig& config,
                                  const synthdata::DatasetManifest& heldout,
                                  const synthdata::DatasetManifest& prior_corpus, double mask_ratio,
                                  std::uint64_t seed);

}  // namespace dropclip::eval
