// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "dropclip/masking/masking.hpp"
#include "dropclip/numerics/ops.hpp"

namespace dropclip::masking {

/// Patch rows that survived dropping, each tagged with its original index.
/// Nothing stands in for dropped rows.
template <typename T>
struct KeptPatches {
  numerics::Tensor<T> tokens;         // (kept, patch_dim)
  std::vector<std::size_t> indices;   // original patch index per row
};

template <typename T>
KeptPatches<T> apply_drop(const numerics::Tensor<T>& tokens, const DropMask& mask) {
  if (tokens.rank() != 2) {
    throw numerics::ShapeError("apply_drop: expected (N, patch_dim) tokens, got " +
                               numerics::shape_str(tokens.shape()));
  }
  const auto& kept = validated_kept(mask, tokens.dim(0));
  return KeptPatches<T>{numerics::gather(tokens, std::span<const std::size_t>(kept)), kept};
}

}  // namespace dropclip::masking
