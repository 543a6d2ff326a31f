// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "dropclip/synthdata/tokenizer.hpp"
#include "dropclip/util/rng.hpp"

namespace dropclip::masking {

/// Independent named random streams derived from one master seed. Streams are
/// keyed by (name, key0, key1), typically (step, sample), so drawing from one
/// never perturbs another.
class RngStreams {
 public:
  static constexpr std::string_view kPatchDrop = "patch-drop";
  static constexpr std::string_view kTextMask = "text-mask";
  static constexpr std::string_view kInit = "init";
  static constexpr std::string_view kDataOrder = "data-order";

  explicit RngStreams(std::uint64_t master_seed) : seed_(master_seed) {}

  std::uint64_t master_seed() const { return seed_; }

  util::Rng stream(std::string_view name, std::uint64_t key0 = 0, std::uint64_t key1 = 0) const {
    return util::Rng(util::mix_seed(util::mix_seed(util::mix_seed(seed_, util::fnv1a(name)), key0), key1));
  }

 private:
  std::uint64_t seed_;
};

class RatioError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// max(1, floor((1 - ratio) * total)).
std::size_t keep_count(std::size_t total, double ratio);
/// max(1, floor(ratio * maskable)) for ratio > 0, else 0.
std::size_t mask_count(std::size_t maskable, double ratio);

struct DropMask {
  std::size_t total = 0;
  double ratio = 0.0;
  std::vector<std::size_t> kept;  // strictly increasing

  bool operator==(const DropMask&) const = default;
};

/// Uniform random subset of keep_count(total, ratio) indices, sorted.
DropMask sample_drop_mask(std::size_t total, double ratio, util::Rng& rng);

/// Checks the mask against a token count and returns its kept indices.
const std::vector<std::size_t>& validated_kept(const DropMask& mask, std::size_t token_count);

struct MaskedText {
  synthdata::TokenizedText input;
  /// position -> original id
  std::map<std::size_t, std::int32_t> targets;

  /// Restores the unmasked sequence.
  synthdata::TokenizedText reconstruct() const;
};

/// Replaces mask_count(maskable, ratio) uniformly chosen word positions with
/// MASK. BOS, EOS and PAD are never masked.
MaskedText mask_text(const synthdata::TokenizedText& tokens, double ratio, util::Rng& rng);

}  // namespace dropclip::masking
