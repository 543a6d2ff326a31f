// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "dropclip/train/config.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace dropclip::train {

TrainConfig TrainConfig::paper_preset() {
  TrainConfig c;
  c.steps = 50000;
  c.batch_size = 1024;
  c.lr = 1e-5;
  c.weight_decay = 0.2;
  c.warmup = 4000;
  c.beta1 = 0.9;
  c.beta2 = 0.98;
  c.eps = 1e-6;
  c.drop_ratio = 0.9;
  c.mask_ratio = 0.15;
  return c;
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("train config: " + what);
  };
  require(steps >= 1, "steps must be positive");
  require(batch_size >= 1, "batch_size must be positive");
  require(warmup < steps, "warmup (" + std::to_string(warmup) + ") must be below steps (" +
                              std::to_string(steps) + ")");
  require(lr > 0.0 && std::isfinite(lr), "lr must be positive");
  require(weight_decay >= 0.0, "weight_decay must be non-negative");
  require(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0, "betas must lie in (0, 1)");
  require(eps > 0.0, "eps must be positive");
  require(drop_ratio >= 0.0 && drop_ratio < 1.0, "drop_ratio must lie in [0, 1)");
  require(mask_ratio >= 0.0 && mask_ratio < 1.0, "mask_ratio must lie in [0, 1)");
  require(mask_weight >= 0.0, "mask_weight must be non-negative");
}

void store(const TrainConfig& c, util::KvDocument& doc, std::string_view prefix) {
  const std::string p(prefix);
  doc.set(p + "steps", std::to_string(c.steps));
  doc.set(p + "batch_size", std::to_string(c.batch_size));
  doc.set(p + "lr", util::format_double(c.lr));
  doc.set(p + "weight_decay", util::format_double(c.weight_decay));
  doc.set(p + "warmup", std::to_string(c.warmup));
  doc.set(p + "beta1", util::format_double(c.beta1));
  doc.set(p + "beta2", util::format_double(c.beta2));
  doc.set(p + "eps", util::format_double(c.eps));
  doc.set(p + "drop_ratio", util::format_double(c.drop_ratio));
  doc.set(p + "mask_ratio", util::format_double(c.mask_ratio));
  doc.set(p + "mask_weight", util::format_double(c.mask_weight));
  doc.set(p + "freeze_text", c.freeze_text ? "true" : "false");
  doc.set(p + "seed", std::to_string(c.seed));
}

TrainConfig load_train_config(const util::KvDocument& doc, std::string_view prefix, TrainConfig c) {
  const std::string p(prefix);
  auto size = [&](const char* key, std::size_t& out) {
    if (const auto* v = doc.find(p + key)) {
      const auto n = util::parse_int(p + key, *v);
      if (n < 0) throw util::FormatError("key '" + p + key + "': must be non-negative");
      out = static_cast<std::size_t>(n);
    }
  };
  auto real = [&](const char* key, double& out) {
    if (const auto* v = doc.find(p + key)) out = util::parse_double(p + key, *v);
  };
  size("steps", c.steps);
  size("batch_size", c.batch_size);
  real("lr", c.lr);
  real("weight_decay", c.weight_decay);
  size("warmup", c.warmup);
  real("beta1", c.beta1);
  real("beta2", c.beta2);
  real("eps", c.eps);
  real("drop_ratio", c.drop_ratio);
  real("mask_ratio", c.mask_ratio);
  real("mask_weight", c.mask_weight);
  if (const auto* v = doc.find(p + "freeze_text")) c.freeze_text = util::parse_bool(p + "freeze_text", *v);
  std::size_t seed = static_cast<std::size_t>(c.seed);
  size("seed", seed);
  c.seed = seed;
  return c;
}

double lr_at(std::size_t step, const TrainConfig& c) {
  if (step > c.steps) {
    throw std::out_of_range("lr_at: step " + std::to_string(step) + " beyond " + std::to_string(c.steps));
  }
  if (step < c.warmup) return c.lr * static_cast<double>(step) / static_cast<double>(c.warmup);
  const double progress =
      static_cast<double>(step - c.warmup) / static_cast<double>(c.steps - c.warmup);
  return c.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace dropclip::train
