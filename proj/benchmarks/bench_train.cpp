// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "dropclip/model/model.hpp"
#include "dropclip/train/trainer.hpp"

namespace {

using namespace dropclip;

// One optimisation step of the default desk model, batch 64; the argument is
// the drop ratio in percent.
void BM_TrainStep(benchmark::State& state) {
  const model::ModelConfig mc;
  train::TrainConfig tc;
  tc.drop_ratio = static_cast<double>(state.range(0)) / 100.0;
  const synthdata::DatasetManifest data;
  const synthdata::Tokenizer tokenizer(data.vocabulary, mc.max_text_len);
  std::vector<train::Example> batch;
  for (std::size_t i = 0; i < tc.batch_size; ++i) batch.push_back(train::make_example(data, tokenizer, i));
  const masking::RngStreams streams(tc.seed);
  auto params = model::init_params<float>(mc, tc.seed);
  train::apply_freeze(params, tc);
  train::AdamW optimizer(tc);
  std::size_t step = tc.warmup, peak = 0;
  for (auto _ : state) {
    const auto r = train::train_step(params, optimizer, mc, tc, batch, streams, step++);
    peak = std::max(peak, r.peak_live_scalars);
  }
  state.counters["peak_live_scalars"] = static_cast<double>(peak);
  state.counters["kept_per_clip"] = static_cast<double>(masking::keep_count(mc.num_patches(), tc.drop_ratio));
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(70)->Arg(80)->Arg(90)->Unit(benchmark::kMillisecond);

}  // namespace
