// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "dropclip/util/kv_file.hpp"

namespace dropclip::train {

/// Optimisation and masking hyperparameters. Defaults are the desk-scale
/// preset; paper_preset() carries the published values.
struct TrainConfig {
  std::size_t steps = 2000;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  double weight_decay = 0.2;
  std::size_t warmup = 100;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-6;
  double drop_ratio = 0.9;
  double mask_ratio = 0.15;
  double mask_weight = 1.0;  // lambda in total = L_con + lambda * L_mask
  bool freeze_text = true;
  std::uint64_t seed = 0;

  static TrainConfig paper_preset();

  /// Throws std::invalid_argument on the first violated constraint.
  void validate() const;

  bool operator==(const TrainConfig&) const = default;
};

void store(const TrainConfig& config, util::KvDocument& doc, std::string_view prefix = "");
TrainConfig load_train_config(const util::KvDocument& doc, std::string_view prefix = "",
                              TrainConfig defaults = {});

/// Linear warmup from 0 to the peak rate, then cosine decay to 0 at `steps`.
double lr_at(std::size_t step, const TrainConfig& config);

}  // namespace dropclip::train
