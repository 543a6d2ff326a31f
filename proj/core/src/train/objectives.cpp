// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "dropclip/train/objectives.hpp"

#include <cmath>
#include <string>

#include "dropclip/model/patchify.hpp"

namespace dropclip::train {

namespace nx = numerics;

namespace {

template <typename T>
void check_unit_rows(const nx::Tensor<T>& x, const char* what) {
  if (x.rank() != 2) {
    throw nx::ShapeError(std::string("info_nce: ") + what + " must be (B, P), got " + nx::shape_str(x.shape()));
  }
  const auto n = x.dim(1);
  const auto d = x.data();
  for (std::size_t r = 0; r < x.dim(0); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < n; ++c) s += static_cast<double>(d[r * n + c]) * d[r * n + c];
    if (std::abs(std::sqrt(s) - 1.0) > 1e-5) {
      throw NormError(std::string("info_nce: ") + what + " row " + std::to_string(r) + " has norm " +
                      std::to_string(std::sqrt(s)));
    }
  }
}

}  // namespace

template <typename T>
nx::Tensor<T> info_nce(const nx::Tensor<T>& video, const nx::Tensor<T>& text,
                       const nx::Tensor<T>& logit_scale) {
  check_unit_rows(video, "video");
  check_unit_rows(text, "text");
  if (video.shape() != text.shape()) {
    throw nx::ShapeError("info_nce: video " + nx::shape_str(video.shape()) + " vs text " +
                         nx::shape_str(text.shape()));
  }
  const auto b = video.dim(0);
  auto logits = nx::mul_scalar(nx::matmul(video, nx::transpose(text)), nx::exp(logit_scale));
  std::vector<std::size_t> diag(b);
  for (std::size_t i = 0; i < b; ++i) diag[i] = i;
  auto v2t = nx::cross_entropy(logits, std::span<const std::size_t>(diag));
  auto t2v = nx::cross_entropy(nx::transpose(logits), std::span<const std::size_t>(diag));
  return nx::scale(nx::add(v2t, t2v), T(0.5));
}

template <typename T>
nx::Tensor<T> mlm_loss(const nx::Tensor<T>& logits, const masking::MaskedText& masked) {
  if (masked.targets.empty()) throw std::invalid_argument("mlm_loss: no target positions");
  if (logits.rank() != 2 || logits.dim(0) != masked.input.ids.size()) {
    throw nx::ShapeError("mlm_loss: logits " + nx::shape_str(logits.shape()) + " for a sequence of " +
                         std::to_string(masked.input.ids.size()));
  }
  const auto t = mask_targets(std::span<const masking::MaskedText>(&masked, 1), logits.dim(0));
  return nx::cross_entropy(nx::gather(logits, std::span<const std::size_t>(t.rows)),
                           std::span<const std::size_t>(t.ids));
}

MaskTargets mask_targets(std::span<const masking::MaskedText> masked, std::size_t length) {
  MaskTargets out;
  for (std::size_t b = 0; b < masked.size(); ++b) {
    for (const auto& [pos, id] : masked[b].targets) {
      out.rows.push_back(b * length + pos);
      out.ids.push_back(static_cast<std::size_t>(id));
    }
  }
  return out;
}

template <typename T>
PreparedBatch<T> prepare_batch(std::span<const Example> examples, const model::ModelConfig& config,
                               double drop_ratio, double mask_ratio,
                               const masking::RngStreams& streams, std::size_t step) {
  PreparedBatch<T> out;
  out.videos.reserve(examples.size());
  out.texts.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto patches = model::patchify<T>(examples[i].clip, config.patch_size);
    auto drop_rng = streams.stream(masking::RngStreams::kPatchDrop, step, i);
    const auto mask = masking::sample_drop_mask(patches.tokens.dim(0), drop_ratio, drop_rng);
    out.videos.push_back(masking::apply_drop(patches.tokens, mask));
    out.texts.push_back(examples[i].text);
    if (mask_ratio > 0.0) {
      auto text_rng = streams.stream(masking::RngStreams::kTextMask, step, i);
      out.masked.push_back(masking::mask_text(examples[i].text, mask_ratio, text_rng));
    }
  }
  return out;
}

template <typename T>
JointLoss<T> joint_loss(const model::ParamTree<T>& params, const model::ModelConfig& config,
                        const PreparedBatch<T>& batch, double mask_weight) {
  const auto video = model::encode_video(params, config,
                                         std::span<const masking::KeptPatches<T>>(batch.videos));
  const auto text = model::encode_text(params, config,
                                       std::span<const synthdata::TokenizedText>(batch.texts));
  JointLoss<T> out;
  out.contrastive = info_nce(nx::l2_normalize(video.pooled), nx::l2_normalize(text.pooled),
                             params["logit_scale"]);
  if (mask_weight == 0.0 || batch.masked.empty()) {
    out.masked = nx::Tensor<T>::scalar(T(0));
    out.total = out.contrastive;
    return out;
  }
  std::vector<synthdata::TokenizedText> inputs;
  inputs.reserve(batch.masked.size());
  for (const auto& m : batch.masked) inputs.push_back(m.input);
  const auto masked_text = model::encode_text(params, config,
                                              std::span<const synthdata::TokenizedText>(inputs));
  const auto hidden = model::decode_hidden(params, config, masked_text, video);
  const auto t = mask_targets(std::span<const masking::MaskedText>(batch.masked), config.max_text_len);
  const auto logits = model::vocab_logits(params, nx::gather(hidden, std::span<const std::size_t>(t.rows)));
  out.masked = nx::cross_entropy(logits, std::span<const std::size_t>(t.ids));
  out.total = nx::add(out.contrastive, nx::scale(out.masked, static_cast<T>(mask_weight)));
  return out;
}

#define DROPCLIP_INSTANTIATE_OBJECTIVES(T)                                                          \
  template nx::Tensor<T> info_nce<T>(const nx::Tensor<T>&, const nx::Tensor<T>&, const nx::Tensor<T>&); \
  template nx::Tensor<T> mlm_loss<T>(const nx::Tensor<T>&, const masking::MaskedText&);              \
  template PreparedBatch<T> prepare_batch<T>(std::span<const Example>, const model::ModelConfig&,    \
                                             double, double, const masking::RngStreams&, std::size_t); \
  template JointLoss<T> joint_loss<T>(const model::ParamTree<T>&, const model::ModelConfig&,          \
                                      const PreparedBatch<T>&, double);

DROPCLIP_INSTANTIATE_OBJECTIVES(float)
DROPCLIP_INSTANTIATE_OBJECTIVES(double)

}  // namespace dropclip::train
