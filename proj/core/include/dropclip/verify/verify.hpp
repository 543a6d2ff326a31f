// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "dropclip/model/config.hpp"
#include "dropclip/model/param_tree.hpp"
#include "dropclip/train/objectives.hpp"

namespace dropclip::verify {

struct CheckResult {
  std::string group;
  std::string name;
  bool passed = false;
  std::string detail;
};

/// numerics, masking, wiseft, retrieval, model, fixtures.
const std::vector<std::string>& groups();

struct VerifyOptions {
  std::string filter;                  // empty: every group
  std::filesystem::path fixture_dir;   // holds golden.ckpt and golden.hashes
};

std::vector<CheckResult> run_verify(const VerifyOptions& options, std::ostream* progress = nullptr);

/// Tiny model used by the full-model gradient oracle: D=8, 2+2+2 layers, V=16.
model::ModelConfig gradcheck_config();

/// Replaces every entry with N(0, std^2) noise so no gradient is exactly zero
/// by construction (zero-initialised projections would otherwise hide paths).
void randomize(model::ParamTree<double>& params, std::uint64_t seed, double std);

/// B=2 batch for gradcheck_config() with fixed drop and text masks.
train::PreparedBatch<double> gradcheck_batch(const model::ModelConfig& config, std::uint64_t seed);

/// Frozen golden checkpoint: a tiny model's init, plus per-entry payload hashes.
model::ModelConfig golden_config();
inline constexpr std::uint64_t kGoldenSeed = 20260415;
void write_golden_fixture(const std::filesystem::path& dir);

}  // namespace dropclip::verify
