// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dropclip/model/config.hpp"
#include "dropclip/synthdata/dataset.hpp"
#include "dropclip/train/config.hpp"

namespace dropclip::eval {

struct BenchRow {
  double ratio = 0.0;
  std::size_t kept_tokens = 0;      // per clip
  double mean_step_seconds = 0.0;
  std::size_t peak_live_scalars = 0;
};

struct BenchOptions {
  std::size_t warmup_steps = 1;
  std::size_t timed_steps = 5;
};

/// Fixed-step training micro-benchmark per drop ratio. Every ratio starts from
/// the same init and sees the same batch and seeds; only the ratio differs.
std::vector<BenchRow> bench_drop(const model::ModelConfig& model_config, const train::TrainConfig& config,
                                 const synthdata::DatasetManifest& data, std::span<const double> ratios,
                                 const BenchOptions& options = {});

}  // namespace dropclip::eval
