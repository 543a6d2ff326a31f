// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "dropclip/model/config.hpp"
#include "dropclip/train/config.hpp"
#include "dropclip/wiseft/wiseft.hpp"

namespace dropclip::pipeline {

inline constexpr std::string_view kRunConfigHeader = "DROPCLIP-RUN v1";

/// pretrain: image-text dual encoder on single-frame static clips, which
/// stands in for a pretrained CLIP. post_pretrain: video-language training
/// from that checkpoint.
enum class Stage : std::uint8_t { pretrain, post_pretrain };

std::string_view name(Stage stage);
Stage parse_stage(std::string_view text);

/// Fully resolved settings of one training command. Sources are merged as
/// defaults < config file < environment < command-line flags, and the result
/// is written next to the outputs as run.cfg.
struct RunConfig {
  Stage stage = Stage::post_pretrain;
  model::ModelConfig model;
  train::TrainConfig train;
  std::optional<wiseft::WiseFtSchedule> wise_ft;
  std::filesystem::path manifest;
  std::filesystem::path init;  // post_pretrain only
  std::filesystem::path output_dir;
  std::size_t threads = 1;

  void validate() const;
};

/// Desk defaults for the stage (stage-0 model: T=1, frame_avg, no decoder,
/// half the patches dropped, no text masking, text trainable).
RunConfig defaults_for(Stage stage);

/// Paper hyperparameters layered over the current values: batch 1024,
/// lr 1e-5, wd 0.2, 50k steps, warmup 4k, beta2 0.98, eps 1e-6, drop 0.9,
/// mask 0.15, WiSE-FT k=10, l=3.
void apply_paper_preset(RunConfig& config);

/// Derives the stage-0 shape of a target model.
model::ModelConfig stage0_model(model::ModelConfig target);

std::string run_config_to_string(const RunConfig& config);

/// Overlays every key present in `text` on `base`. Unknown keys are errors.
RunConfig parse_run_config(std::string_view text, const RunConfig& base);
RunConfig read_run_config(const std::filesystem::path& path, const RunConfig& base);
void write_run_config(const RunConfig& config, const std::filesystem::path& path);

/// DROPCLIP_SEED and DROPCLIP_THREADS. `lookup` returns null for unset names.
using EnvLookup = std::function<const char*(const char*)>;
void apply_environment(RunConfig& config, const EnvLookup& lookup);

/// "k,l" -> schedule; throws std::invalid_argument on malformed text.
wiseft::WiseFtSchedule parse_schedule(std::string_view text);

}  // namespace dropclip::pipeline
