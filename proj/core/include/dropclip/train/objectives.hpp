// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dropclip/masking/apply_drop.hpp"
#include "dropclip/masking/masking.hpp"
#include "dropclip/model/model.hpp"
#include "dropclip/synthdata/scene.hpp"

namespace dropclip::train {

/// Stored logit scale ln(1/tau) is clamped so tau stays in [0.01, 100].
inline constexpr double kMaxLogitScale = 4.605170185988091;  // ln 100

class NormError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Symmetric InfoNCE over unit-norm rows: logits = exp(logit_scale) * v t^T,
/// loss = (CE(logits, diag) + CE(logits^T, diag)) / 2. Throws NormError if any
/// row norm is off by more than 1e-5.
template <typename T>
numerics::Tensor<T> info_nce(const numerics::Tensor<T>& video, const numerics::Tensor<T>& text,
                             const numerics::Tensor<T>& logit_scale);

/// Mean cross-entropy over the target positions of one sequence; logits (L, V).
template <typename T>
numerics::Tensor<T> mlm_loss(const numerics::Tensor<T>& logits, const masking::MaskedText& masked);

/// Flattened (row, target id) pairs for a batch of masked sequences of length L.
struct MaskTargets {
  std::vector<std::size_t> rows;
  std::vector<std::size_t> ids;
};
MaskTargets mask_targets(std::span<const masking::MaskedText> masked, std::size_t length);

struct Example {
  synthdata::VideoClip clip;
  synthdata::TokenizedText text;
};

/// Everything random about one step, drawn up front.
template <typename T>
struct PreparedBatch {
  std::vector<masking::KeptPatches<T>> videos;
  std::vector<synthdata::TokenizedText> texts;
  std::vector<masking::MaskedText> masked;  // empty when the masked-text path is off
};

/// Patchifies, drops (stream "patch-drop", key (step, i)) and masks (stream
/// "text-mask", key (step, i)). Masking is skipped when mask_ratio is 0.
template <typename T>
PreparedBatch<T> prepare_batch(std::span<const Example> examples, const model::ModelConfig& config,
                               double drop_ratio, double mask_ratio,
                               const masking::RngStreams& streams, std::size_t step);

template <typename T>
struct JointLoss {
  numerics::Tensor<T> total;
  numerics::Tensor<T> contrastive;
  numerics::Tensor<T> masked;  // scalar 0 when the masked-text path is off
};

/// L_con + mask_weight * L_mask through the full model.
template <typename T>
JointLoss<T> joint_loss(const model::ParamTree<T>& params, const model::ModelConfig& config,
                        const PreparedBatch<T>& batch, double mask_weight);

}  // namespace dropclip::train
