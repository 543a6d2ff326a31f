// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "dropclip/masking/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace dropclip::masking {

namespace {

// Absorbs representation error such as (1 - 0.8) * 10 = 1.9999999999999996.
constexpr double kFloorSlack = 1e-9;

void check_ratio(const char* what, double ratio) {
  if (!(ratio >= 0.0 && ratio < 1.0)) {
    throw RatioError(std::string(what) + ": ratio must lie in [0, 1), got " + std::to_string(ratio));
  }
}

// Partial Fisher-Yates: first k entries become a uniform k-subset.
std::vector<std::size_t> choose(std::vector<std::size_t> pool, std::size_t k, util::Rng& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.below(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

std::size_t keep_count(std::size_t total, double ratio) {
  check_ratio("keep_count", ratio);
  const auto kept = static_cast<std::size_t>(std::floor((1.0 - ratio) * static_cast<double>(total) + kFloorSlack));
  return std::max<std::size_t>(1, std::min(kept, total));
}

std::size_t mask_count(std::size_t maskable, double ratio) {
  check_ratio("mask_count", ratio);
  if (ratio == 0.0) return 0;
  const auto m = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(maskable) + kFloorSlack));
  return std::max<std::size_t>(1, m);
}

DropMask sample_drop_mask(std::size_t total, double ratio, util::Rng& rng) {
  check_ratio("sample_drop_mask", ratio);
  if (total == 0) throw std::invalid_argument("sample_drop_mask: need at least one token");
  DropMask mask;
  mask.total = total;
  mask.ratio = ratio;
  const std::size_t k = keep_count(total, ratio);
  if (k == total) {
    mask.kept.resize(total);
    std::iota(mask.kept.begin(), mask.kept.end(), 0);
    return mask;
  }
  std::vector<std::size_t> pool(total);
  std::iota(pool.begin(), pool.end(), 0);
  mask.kept = choose(std::move(pool), k, rng);
  return mask;
}

const std::vector<std::size_t>& validated_kept(const DropMask& mask, std::size_t token_count) {
  if (mask.total != token_count) {
    throw std::invalid_argument("apply_drop: mask covers " + std::to_string(mask.total) +
                                " tokens, input has " + std::to_string(token_count));
  }
  for (std::size_t i = 0; i < mask.kept.size(); ++i) {
    if (mask.kept[i] >= token_count) {
      throw std::out_of_range("apply_drop: kept index " + std::to_string(mask.kept[i]) +
                              " out of bounds for " + std::to_string(token_count) + " tokens");
    }
    if (i > 0 && mask.kept[i] <= mask.kept[i - 1]) {
      throw std::invalid_argument("apply_drop: kept indices must be strictly increasing");
    }
  }
  return mask.kept;
}

synthdata::TokenizedText MaskedText::reconstruct() const {
  auto out = input;
  for (const auto& [pos, id] : targets) out.ids.at(pos) = id;
  return out;
}

MaskedText mask_text(const synthdata::TokenizedText& tokens, double ratio, util::Rng& rng) {
  check_ratio("mask_text", ratio);
  std::vector<std::size_t> maskable;
  for (std::size_t i = 0; i < tokens.ids.size(); ++i) {
    const auto id = tokens.ids[i];
    if (id == synthdata::kMask) throw std::invalid_argument("mask_text: input already contains MASK");
    if (id != synthdata::kPad && id != synthdata::kBos && id != synthdata::kEos) maskable.push_back(i);
  }
  MaskedText out;
  out.input = tokens;
  const std::size_t m = mask_count(maskable.size(), ratio);
  if (m == 0) return out;
  if (maskable.empty()) throw std::invalid_argument("mask_text: no maskable positions");
  for (auto pos : choose(std::move(maskable), m, rng)) {
    out.targets.emplace(pos, tokens.ids[pos]);
    out.input.ids[pos] = synthdata::kMask;
  }
  return out;
}

}  // namespace dropclip::masking
