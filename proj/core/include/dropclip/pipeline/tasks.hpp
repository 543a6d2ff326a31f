// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dropclip/eval/fusion.hpp"
#include "dropclip/eval/report.hpp"
#include "dropclip/model/config.hpp"
#include "dropclip/model/param_tree.hpp"
#include "dropclip/synthdata/dataset.hpp"

namespace dropclip::pipeline {

enum class EvalTask : std::uint8_t { retrieval, multiple_choice, classify, vqa, masked_tokens };

std::string_view name(EvalTask task);
EvalTask parse_eval_task(std::string_view text);

/// Inputs of one evaluation. Clips are always encoded with every patch kept.
struct EvalRequest {
  EvalTask task = EvalTask::retrieval;
  synthdata::DatasetManifest split;
  // vqa: split the answer head is fitted on. masked_tokens: prior corpus.
  std::optional<synthdata::DatasetManifest> reference;
  eval::VqaFeatureMode mode = eval::VqaFeatureMode::combined;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  // multiple_choice: candidate directions; clips moving otherwise are skipped.
  std::vector<synthdata::Motion> choices{synthdata::Motion::left, synthdata::Motion::right};
  // multiple_choice: qualifying clips to use; other tasks: leading samples of
  // the split. 0 = all.
  std::size_t limit = 0;
  double mask_ratio = 0.15;
  std::uint64_t seed = 0;
};

struct EvalReport {
  std::string title;
  eval::Table table;
  std::vector<std::pair<std::string, double>> metrics;  // headline numbers, in report order

  std::string text() const;     // human-readable
  std::string records() const;  // one key=value line per metric
  double metric(std::string_view key) const;
};

/// Prompt templates for zero-shot direction classification.
const std::vector<std::string>& direction_templates();

EvalReport run_eval(const model::ParamTree<float>& params, const model::ModelConfig& config,
                    const EvalRequest& request);

}  // namespace dropclip::pipeline
