// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "dropclip/numerics/ops.hpp"
#include "dropclip/util/rng.hpp"

namespace {

namespace nx = dropclip::numerics;

nx::Tensor<float> noise(nx::Shape shape, std::uint64_t seed) {
  dropclip::util::Rng rng(seed);
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return nx::Tensor<float>(std::move(shape), std::move(v));
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = noise({n, 32}, 1), b = noise({32, 32}, 2);
  nx::NoGradScope<float> no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(nx::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Matmul)->Arg(16)->Arg(128)->Arg(1024);

// Per-frame attention: `tokens` keys split evenly across 8 segments.
void BM_SegmentAttention(benchmark::State& state) {
  const auto tokens = static_cast<std::size_t>(state.range(0));
  const auto q = noise({tokens, 32}, 3), k = noise({tokens, 32}, 4), v = noise({tokens, 32}, 5);
  nx::AttentionLayout layout;
  for (std::size_t i = 0; i < tokens; ++i) layout.query_segment.push_back(static_cast<std::int32_t>(i * 8 / tokens));
  layout.key_segment = layout.query_segment;
  nx::NoGradScope<float> no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(nx::attention(q, k, v, 2, layout));
}
BENCHMARK(BM_SegmentAttention)->Arg(16)->Arg(40)->Arg(128);

void BM_MatmulBackward(benchmark::State& state) {
  const auto a = noise({128, 32}, 6), b = noise({32, 32}, 7);
  for (auto _ : state) {
    nx::Tape<float> tape;
    nx::TapeScope<float> scope(tape);
    auto w = b.clone();
    w.set_requires_grad(true);
    const auto loss = nx::sum_all(nx::matmul(a, w));
    tape.backward(loss);
    benchmark::DoNotOptimize(w.grad());
  }
}
BENCHMARK(BM_MatmulBackward);

}  // namespace
