// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "dropclip/numerics/tensor.hpp"
#include "dropclip/synthdata/scene.hpp"

namespace dropclip::model {

struct PatchPosition {
  std::size_t frame = 0;
  std::size_t row = 0;
  std::size_t col = 0;

  bool operator==(const PatchPosition&) const = default;
};

/// Non-overlapping patches, frames in order and row-major within a frame.
/// Each token holds patch_size * patch_size * 3 values ordered (dy, dx, c).
template <typename T>
struct Patches {
  numerics::Tensor<T> tokens;  // (N, patch_dim)
  std::vector<PatchPosition> positions;
};

template <typename T>
Patches<T> patchify(const synthdata::VideoClip& clip, std::size_t patch_size);

}  // namespace dropclip::model
