// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "dropclip/numerics/grad_check.hpp"
#include "dropclip/numerics/ops.hpp"
#include "dropclip/util/rng.hpp"

namespace nx = dropclip::numerics;
using dropclip::util::Rng;

namespace {

nx::Tensor<double> randn(Rng& rng, nx::Shape shape) {
  std::vector<double> d(nx::shape_size(shape));
  for (auto& x : d) x = rng.normal();
  return nx::Tensor<double>(std::move(shape), std::move(d));
}

// Scalar probe sum(w * y) with fixed random weights.
nx::Tensor<double> probe(const nx::Tensor<double>& y, std::uint64_t seed) {
  Rng rng(seed);
  return nx::sum_all(nx::mul(y, randn(rng, y.shape())));
}

}  // namespace

TEST(Tensor, ShapeMismatchNamesBothSizes) {
  try {
    nx::Tensor<float>({2, 3}, std::vector<float>(5));
    FAIL();
  } catch (const nx::ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("6"), std::string::npos);
  }
}

TEST(Tensor, CopiesShareStorageCloneDoesNot) {
  nx::Tensor<float> a({2}, {1, 2});
  auto b = a;
  auto c = a.clone();
  a.mutable_data()[0] = 5;
  EXPECT_EQ(b.data()[0], 5);
  EXPECT_EQ(c.data()[0], 1);
}

TEST(Ops, MatmulMatchesHandProduct) {
  const nx::Tensor<double> a({2, 3}, {1, 2, 3, 4, 5, 6});
  const nx::Tensor<double> b({3, 2}, {7, 8, 9, 10, 11, 12});
  const auto c = nx::matmul(a, b);
  ASSERT_EQ(c.shape(), (nx::Shape{2, 2}));
  EXPECT_EQ(std::vector<double>(c.data().begin(), c.data().end()), (std::vector<double>{58, 64, 139, 154}));
}

TEST(Ops, BroadcastOnlyOverLeadingAxes) {
  const nx::Tensor<double> a({2, 3}, {0, 0, 0, 1, 1, 1});
  const nx::Tensor<double> row({3}, {1, 2, 3});
  const auto s = nx::add(a, row);
  EXPECT_EQ(s.data()[5], 4.0);
  EXPECT_THROW(nx::add(a, nx::Tensor<double>({2}, {1, 2})), nx::ShapeError);
}

TEST(Ops, SoftmaxOfLogTwoGap) {
  const nx::Tensor<double> x({1, 2}, {0.0, std::log(2.0)});
  const auto s = nx::softmax(x, 1);
  EXPECT_NEAR(s.data()[0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(s.data()[1], 2.0 / 3.0, 1e-15);
}

TEST(Ops, LogSoftmaxStableForLargeInputs) {
  const nx::Tensor<double> x({1, 2}, {1000.0, 1000.0});
  const auto s = nx::log_softmax(x, 1);
  EXPECT_NEAR(s.data()[0], -std::log(2.0), 1e-12);
}

TEST(Ops, GeluIsErfForm) {
  const nx::Tensor<double> x({3}, {-1.0, 0.0, 1.5});
  const auto y = nx::gelu(x);
  for (std::size_t i = 0; i < 3; ++i) {
    const double v = x.data()[i];
    EXPECT_NEAR(y.data()[i], 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))), 1e-14);
  }
}

TEST(Ops, LayerNormMatchesDirectFormula) {
  const nx::Tensor<double> x({1, 4}, {1, 2, 3, 6});
  const nx::Tensor<double> g({4}, {1, 2, 1, 1});
  const nx::Tensor<double> b({4}, {0, 0, 1, 0});
  const auto y = nx::layer_norm(x, g, b);
  const double mu = 3.0, var = (4 + 1 + 0 + 9) / 4.0;
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(y.data()[i], (x.data()[i] - mu) / std::sqrt(var + 1e-5) * g.data()[i] + b.data()[i], 1e-12);
  }
}

TEST(Ops, L2NormalizeZeroVectorWarnsAndStaysZero) {
  const auto before = nx::zero_norm_warnings();
  const auto y = nx::l2_normalize(nx::Tensor<double>({2, 2}, {0, 0, 3, 4}));
  EXPECT_EQ(y.data()[0], 0.0);
  EXPECT_NEAR(y.data()[2], 0.6, 1e-15);
  EXPECT_EQ(nx::zero_norm_warnings(), before + 1);
}

TEST(Ops, AttentionMatchesNaiveSingleHead) {
  Rng rng(3);
  const auto q = randn(rng, {3, 4});
  const auto k = randn(rng, {3, 4});
  const auto v = randn(rng, {3, 4});
  // Query 0 sees keys 0,1; query 1 sees key 2; query 2 is excluded.
  const nx::AttentionLayout layout{{0, 1, -1}, {0, 0, 1}};
  const auto y = nx::attention(q, k, v, 1, layout);
  auto row = [&](std::size_t i, std::vector<std::size_t> keys) {
    std::vector<double> s;
    double mx = -1e300;
    for (auto j : keys) {
      double d = 0;
      for (std::size_t c = 0; c < 4; ++c) d += q.data()[i * 4 + c] * k.data()[j * 4 + c];
      s.push_back(d / 2.0);
      mx = std::max(mx, s.back());
    }
    double z = 0;
    for (auto& x : s) z += (x = std::exp(x - mx));
    std::vector<double> out(4, 0.0);
    for (std::size_t t = 0; t < keys.size(); ++t)
      for (std::size_t c = 0; c < 4; ++c) out[c] += s[t] / z * v.data()[keys[t] * 4 + c];
    return out;
  };
  const auto r0 = row(0, {0, 1});
  const auto r1 = row(1, {2});
  for (std::size_t c = 0; c < 4; ++c) {
    EXPECT_NEAR(y.data()[c], r0[c], 1e-12);
    EXPECT_NEAR(y.data()[4 + c], r1[c], 1e-12);
    EXPECT_EQ(y.data()[8 + c], 0.0);
  }
}

TEST(Ops, GatherAndEmbeddingRejectBadIndices) {
  const nx::Tensor<double> t({2, 2}, {1, 2, 3, 4});
  const std::vector<std::size_t> bad{2};
  EXPECT_THROW(nx::gather(t, std::span<const std::size_t>(bad)), std::out_of_range);
  const std::vector<std::int32_t> neg{-1};
  EXPECT_THROW(nx::embedding(t, std::span<const std::int32_t>(neg)), std::out_of_range);
}

class OpGradient : public ::testing::TestWithParam<int> {};

TEST_P(OpGradient, CentralDifferencesAgree) {
  Rng rng(static_cast<std::uint64_t>(GetParam()));
  std::vector<nx::Tensor<double>> leaves{randn(rng, {3, 4}), randn(rng, {4, 5}), randn(rng, {5}), randn(rng, {5})};
  const nx::AttentionLayout layout{{0, 0, 1}, {0, 1, 1}};
  auto f = [&]() {
    auto h = nx::layer_norm(nx::matmul(leaves[0], leaves[1]), leaves[2], leaves[3]);
    auto a = nx::attention(h, h, nx::gelu(h), 1, layout);
    return nx::add(probe(nx::log_softmax(a, 1), 9), probe(nx::l2_normalize(h), 10));
  };
  const auto r = nx::grad_check(f, std::span<nx::Tensor<double>>(leaves));
  EXPECT_LT(r.max_rel_error, 1e-6) << "leaf " << r.worst_leaf << " index " << r.worst_index;
}

INSTANTIATE_TEST_SUITE_P(Seeds, OpGradient, ::testing::Range(0, 5));

TEST(Tape, BackwardNeedsScalarFromSameTape) {
  nx::Tape<double> tape;
  nx::TapeScope<double> scope(tape);
  nx::Tensor<double> x({2}, {1, 2}, true);
  const auto y = nx::scale(x, 2.0);
  EXPECT_THROW(tape.backward(y), nx::GradError);
  const auto s = nx::sum_all(y);
  tape.backward(s);
  EXPECT_EQ(x.grad()[0], 2.0);
  nx::Tape<double> other;
  EXPECT_THROW(other.backward(s), nx::GradError);
}

TEST(Tape, NoGradScopeRecordsNothing) {
  nx::Tape<double> tape;
  nx::TapeScope<double> scope(tape);
  nx::Tensor<double> x({2}, {1, 2}, true);
  {
    nx::NoGradScope<double> off;
    (void)nx::exp(x);
  }
  EXPECT_EQ(tape.size(), 0u);
  (void)nx::exp(x);
  EXPECT_EQ(tape.size(), 1u);
}

TEST(Tape, PeakLiveScalarsTracksLargestWorkingSet) {
  nx::Tape<double> tape;
  nx::TapeScope<double> scope(tape);
  nx::Tensor<double> x({100}, std::vector<double>(100, 1.0), true);
  const auto y = nx::sum_all(nx::exp(x));
  EXPECT_GE(tape.peak_live_scalars(), 101u);
  tape.backward(y);
  EXPECT_GE(tape.peak_live_scalars(), 201u);
}
