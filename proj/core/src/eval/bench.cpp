// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "dropclip/eval/bench.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>

#include "dropclip/model/model.hpp"
#include "dropclip/train/trainer.hpp"

namespace dropclip::eval {

std::vector<BenchRow> bench_drop(const model::ModelConfig& model_config, const train::TrainConfig& config,
                                 const synthdata::DatasetManifest& data, std::span<const double> ratios,
                                 const BenchOptions& options) {
  if (ratios.size() < 2 || std::find(ratios.begin(), ratios.end(), 0.0) == ratios.end()) {
    throw std::invalid_argument("bench_drop: need at least two ratios including the 0.0 baseline");
  }
  if (options.timed_steps == 0) throw std::invalid_argument("bench_drop: timed_steps must be positive");
  const synthdata::Tokenizer tokenizer(data.vocabulary, model_config.max_text_len);
  std::vector<train::Example> batch;
  for (std::size_t i = 0; i < config.batch_size; ++i) batch.push_back(train::make_example(data, tokenizer, i % data.count));
  const masking::RngStreams streams(config.seed);
  const auto base = model::init_params<float>(model_config, config.seed);

  std::vector<BenchRow> rows;
  for (double ratio : ratios) {
    auto cfg = config;
    cfg.drop_ratio = ratio;
    cfg.validate();
    auto params = base.clone();
    train::apply_freeze(params, cfg);
    train::AdamW optimizer(cfg);
    BenchRow row;
    row.ratio = ratio;
    row.kept_tokens = masking::keep_count(model_config.num_patches(), ratio);
    const auto total = options.warmup_steps + options.timed_steps;
    double seconds = 0.0;
    for (std::size_t s = 0; s < total; ++s) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto r = train::train_step(params, optimizer, model_config, cfg, batch, streams, cfg.warmup + s);
      const auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (s >= options.warmup_steps) seconds += dt;
      row.peak_live_scalars = std::max(row.peak_live_scalars, r.peak_live_scalars);
    }
    row.mean_step_seconds = seconds / static_cast<double>(options.timed_steps);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace dropclip::eval
