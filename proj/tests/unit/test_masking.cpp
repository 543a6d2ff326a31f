// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <set>

#include "dropclip/masking/apply_drop.hpp"
#include "dropclip/masking/masking.hpp"

namespace mk = dropclip::masking;
namespace sd = dropclip::synthdata;
using dropclip::util::Rng;

namespace {

// Integer-only oracle for floor((1 - tenths/10) * n) with a floor of one.
std::size_t keep_oracle(std::size_t n, std::size_t tenths) { return std::max<std::size_t>(1, n * (10 - tenths) / 10); }

sd::TokenizedText words(std::size_t n, std::size_t pad = 2) {
  sd::TokenizedText t;
  t.ids.push_back(sd::kBos);
  for (std::size_t i = 0; i < n; ++i) t.ids.push_back(static_cast<std::int32_t>(sd::kNumSpecial + i % 20));
  t.ids.push_back(sd::kEos);
  t.ids.insert(t.ids.end(), pad, sd::kPad);
  return t;
}

}  // namespace

TEST(KeepCount, FloorRuleWithMinimumOne) {
  for (std::size_t n : {1, 2, 7, 10, 128, 1568}) {
    for (std::size_t tenths : {0, 3, 5, 7, 8, 9}) {
      EXPECT_EQ(mk::keep_count(n, tenths / 10.0), keep_oracle(n, tenths)) << n << " " << tenths;
    }
  }
  EXPECT_EQ(mk::keep_count(1568, 0.9), 156u);
}

TEST(KeepCount, RatioOutsideUnitIntervalRejected) {
  EXPECT_THROW(mk::keep_count(10, -0.1), mk::RatioError);
  EXPECT_THROW(mk::keep_count(10, 1.0), mk::RatioError);
}

TEST(MaskCount, FloorRuleWithMinimumOne) {
  EXPECT_EQ(mk::mask_count(5, 0.15), 1u);
  EXPECT_EQ(mk::mask_count(20, 0.15), 3u);
  EXPECT_EQ(mk::mask_count(7, 0.0), 0u);
}

TEST(DropMask, SortedUniqueInRange) {
  Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    const auto m = mk::sample_drop_mask(128, 0.7, rng);
    ASSERT_EQ(m.kept.size(), 38u);
    ASSERT_TRUE(std::is_sorted(m.kept.begin(), m.kept.end()));
    ASSERT_EQ(std::set<std::size_t>(m.kept.begin(), m.kept.end()).size(), m.kept.size());
    ASSERT_LT(m.kept.back(), 128u);
  }
}

TEST(DropMask, ZeroRatioKeepsEverything) {
  Rng rng(1);
  const auto m = mk::sample_drop_mask(16, 0.0, rng);
  ASSERT_EQ(m.kept.size(), 16u);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(m.kept[i], i);
}

TEST(DropMask, PerIndexFrequencyIsUniform) {
  const mk::RngStreams streams(5);
  std::vector<std::size_t> hits(10, 0);
  for (std::size_t t = 0; t < 10000; ++t) {
    auto rng = streams.stream(mk::RngStreams::kPatchDrop, t, 0);
    for (auto i : mk::sample_drop_mask(10, 0.5, rng).kept) ++hits[i];
  }
  for (auto h : hits) {
    EXPECT_GE(h, 4700u);
    EXPECT_LE(h, 5300u);
  }
}

TEST(ApplyDrop, SelectsRowsAndChecksShape) {
  const dropclip::numerics::Tensor<float> tokens({4, 2}, {0, 0, 1, 1, 2, 2, 3, 3});
  mk::DropMask mask{4, 0.5, {1, 3}};
  const auto kept = mk::apply_drop(tokens, mask);
  EXPECT_EQ(kept.indices, (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(kept.tokens.data()[2], 3.0f);
  mask.total = 5;
  EXPECT_THROW(mk::apply_drop(tokens, mask), std::exception);
}

TEST(MaskText, NeverTouchesSpecialsAndReconstructs) {
  Rng rng(8);
  const auto t = words(9);
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = mk::mask_text(t, 0.3, rng);
    ASSERT_EQ(m.targets.size(), 2u);
    for (const auto& [pos, id] : m.targets) {
      ASSERT_GT(pos, 0u);
      ASSERT_LT(pos, 10u);
      ASSERT_EQ(m.input.ids[pos], sd::kMask);
      ASSERT_EQ(t.ids[pos], id);
    }
    ASSERT_EQ(m.reconstruct(), t);
  }
}

TEST(MaskText, ZeroRatioIsIdentity) {
  Rng rng(2);
  const auto t = words(4);
  const auto m = mk::mask_text(t, 0.0, rng);
  EXPECT_TRUE(m.targets.empty());
  EXPECT_EQ(m.input, t);
}

TEST(RngStreams, NamedStreamsAreIndependent) {
  const mk::RngStreams s(42);
  auto a = s.stream(mk::RngStreams::kPatchDrop, 1, 2);
  auto b = s.stream(mk::RngStreams::kPatchDrop, 1, 2);
  auto c = s.stream(mk::RngStreams::kTextMask, 1, 2);
  auto d = s.stream(mk::RngStreams::kPatchDrop, 2, 1);
  const auto x = a.next();
  EXPECT_EQ(x, b.next());
  EXPECT_NE(x, c.next());
  EXPECT_NE(x, d.next());
}
