// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "dropclip/masking/masking.hpp"
#include "dropclip/model/config.hpp"
#include "dropclip/model/param_tree.hpp"
#include "dropclip/synthdata/dataset.hpp"
#include "dropclip/train/config.hpp"
#include "dropclip/train/objectives.hpp"
#include "dropclip/train/optimizer.hpp"
#include "dropclip/wiseft/wiseft.hpp"

namespace dropclip::train {

struct LossBreakdown {
  double contrastive = 0.0;
  double masked = 0.0;
  double total = 0.0;

  bool operator==(const LossBreakdown&) const = default;
};

class NonFiniteLossError : public std::runtime_error {
 public:
  NonFiniteLossError(std::size_t step, const LossBreakdown& losses);
  const LossBreakdown& losses() const { return losses_; }

 private:
  LossBreakdown losses_;
};

struct StepResult {
  LossBreakdown losses;
  double lr = 0.0;
  std::size_t kept_tokens = 0;        // summed over the batch
  std::size_t peak_live_scalars = 0;  // tape high-water mark, forward + backward
};

/// Sets text-encoder entries frozen or trainable according to the config.
void apply_freeze(model::ParamTree<float>& params, const TrainConfig& config);

Example make_example(const synthdata::DatasetManifest& manifest, const synthdata::Tokenizer& tokenizer,
                     std::size_t index);

/// One optimisation step at global step index `step` (lr = lr_at(step)).
StepResult train_step(model::ParamTree<float>& params, AdamW& optimizer,
                      const model::ModelConfig& model_config, const TrainConfig& config,
                      std::span<const Example> batch, const masking::RngStreams& streams,
                      std::size_t step);

std::size_t steps_per_epoch(std::size_t count, std::size_t batch_size);

/// Sample order for one epoch (stream "data-order", key epoch).
std::vector<std::size_t> epoch_order(const masking::RngStreams& streams, std::size_t count,
                                     std::size_t epoch);

std::filesystem::path snapshot_path(const std::filesystem::path& dir, std::size_t epoch);
std::filesystem::path optimizer_path(const std::filesystem::path& dir, std::size_t epoch);

struct TrainingJob {
  model::ModelConfig model;
  TrainConfig train;
  synthdata::DatasetManifest data;
  std::optional<wiseft::WiseFtSchedule> wise_ft;
  std::filesystem::path output_dir;
};

struct TrainingResult {
  wiseft::CheckpointSeries<float> series;
  std::vector<LossBreakdown> losses;  // one per step run by this call
  std::vector<std::size_t> ensembled_epochs;
};

/// Trains from `init` (snapshot theta_0). Epochs hold steps_per_epoch steps; the
/// last epoch may be shorter so the run ends at exactly config.steps. After each
/// epoch theta_n (post-ensemble when WiSE-FT fires) and the optimizer state are
/// written to the output dir, and one metrics line per step goes to
/// metrics.log (and `log`, if given).
TrainingResult run_training(const TrainingJob& job, const model::ParamTree<float>& init,
                            std::ostream* log = nullptr);

/// Continues a run from the snapshot and optimizer state saved after `epoch`.
TrainingResult resume_training(const TrainingJob& job, std::size_t epoch, std::ostream* log = nullptr);

}  // namespace dropclip::train
