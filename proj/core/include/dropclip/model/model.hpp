// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dropclip/masking/apply_drop.hpp"
#include "dropclip/model/config.hpp"
#include "dropclip/model/param_tree.hpp"
#include "dropclip/numerics/ops.hpp"
#include "dropclip/synthdata/tokenizer.hpp"

namespace dropclip::model {

inline constexpr double kDefaultInitStd = 0.02;

/// Fresh parameters. Each entry draws from its own stream keyed by name, so
/// adding an entry never changes the others. Output projections of the
/// temporal block and of every decoder cross-attention start at zero.
template <typename T>
ParamTree<T> init_params(const ModelConfig& config, std::uint64_t seed,
                         double init_std = kDefaultInitStd);

/// Fresh parameters for `target`, with every entry of `base` that matches in
/// name and shape copied over. Throws StructureError on a name match with a
/// different shape.
ParamTree<float> adapt_params(const ParamTree<float>& base, const ModelConfig& target,
                              std::uint64_t seed);

template <typename T>
struct VisionFeatures {
  /// Per sample: the pooled (pre-projection) video feature, then one row per
  /// kept patch in ascending original index. Shape (sum(kept + 1), embed_dim).
  numerics::Tensor<T> tokens;
  std::vector<std::size_t> offsets;  // batch + 1 row offsets into tokens
  std::vector<std::vector<std::size_t>> indices;
  numerics::Tensor<T> pooled;  // (batch, proj_dim)

  std::size_t batch() const { return indices.size(); }
};

template <typename T>
struct TextFeatures {
  numerics::Tensor<T> tokens;  // (batch * length, embed_dim)
  numerics::Tensor<T> pooled;  // (batch, proj_dim), read at the first EOS
  std::vector<std::int32_t> ids;  // flattened input ids
  std::size_t batch = 0;
  std::size_t length = 0;
};

/// Only kept patches enter the encoder; dropped ones leave no placeholder.
template <typename T>
VisionFeatures<T> encode_video(const ParamTree<T>& params, const ModelConfig& config,
                               std::span<const masking::KeptPatches<T>> videos);

template <typename T>
TextFeatures<T> encode_text(const ParamTree<T>& params, const ModelConfig& config,
                            std::span<const synthdata::TokenizedText> texts);

/// Decoder hidden states (batch * length, decoder_dim) for masked text
/// attending to the matching sample's video tokens.
template <typename T>
numerics::Tensor<T> decode_hidden(const ParamTree<T>& params, const ModelConfig& config,
                                  const TextFeatures<T>& masked_text,
                                  const VisionFeatures<T>& video);

/// Vocabulary logits for selected hidden rows.
template <typename T>
numerics::Tensor<T> vocab_logits(const ParamTree<T>& params, const numerics::Tensor<T>& hidden);

/// Logits (batch * length, vocab_size) over every text position.
template <typename T>
numerics::Tensor<T> cross_decode(const ParamTree<T>& params, const ModelConfig& config,
                                 const TextFeatures<T>& masked_text,
                                 const VisionFeatures<T>& video) {
  return vocab_logits(params, decode_hidden(params, config, masked_text, video));
}

}  // namespace dropclip::model
