// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "dropclip/model/patchify.hpp"

#include <stdexcept>
#include <string>

namespace dropclip::model {

template <typename T>
Patches<T> patchify(const synthdata::VideoClip& clip, std::size_t patch_size) {
  if (patch_size == 0 || clip.height % patch_size != 0 || clip.width % patch_size != 0) {
    throw std::invalid_argument("patchify: " + std::to_string(clip.height) + "x" +
                                std::to_string(clip.width) + " frame is not divisible by patch size " +
                                std::to_string(patch_size));
  }
  constexpr std::size_t c = synthdata::VideoClip::kChannels;
  const std::size_t rows = clip.height / patch_size;
  const std::size_t cols = clip.width / patch_size;
  const std::size_t n = clip.frames * rows * cols;
  const std::size_t dim = patch_size * patch_size * c;
  std::vector<T> data(n * dim);
  Patches<T> out;
  out.positions.reserve(n);
  std::size_t at = 0;
  for (std::size_t t = 0; t < clip.frames; ++t) {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t q = 0; q < cols; ++q) {
        out.positions.push_back(PatchPosition{t, r, q});
        for (std::size_t dy = 0; dy < patch_size; ++dy) {
          const float* src = &clip.pixels[((t * clip.height + r * patch_size + dy) * clip.width + q * patch_size) * c];
          for (std::size_t k = 0; k < patch_size * c; ++k) data[at++] = static_cast<T>(src[k]);
        }
      }
    }
  }
  out.tokens = numerics::Tensor<T>({n, dim}, std::move(data));
  return out;
}

template Patches<float> patchify(const synthdata::VideoClip&, std::size_t);
template Patches<double> patchify(const synthdata::VideoClip&, std::size_t);

}  // namespace dropclip::model
