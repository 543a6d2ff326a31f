// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string_view>

#include "dropclip/model/param_tree.hpp"
#include "dropclip/train/config.hpp"

namespace dropclip::train {

/// Biases, norm gains/biases and the logit scale are exempt from weight decay.
bool decays(std::string_view name);

/// Adam with decoupled weight decay:
///   theta -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta)
/// Only trainable entries move. A trainable entry without a gradient is
/// treated as having a zero gradient, so it still decays.
class AdamW {
 public:
  AdamW(double beta1, double beta2, double eps, double weight_decay);
  explicit AdamW(const TrainConfig& config)
      : AdamW(config.beta1, config.beta2, config.eps, config.weight_decay) {}

  void step(model::ParamTree<float>& params, double lr);

  std::size_t steps_taken() const { return t_; }

  /// Moments as a tree ("m.<name>", "v.<name>", plus "t") for checkpointing.
  model::ParamTree<float> state() const;
  void load_state(const model::ParamTree<float>& state);

 private:
  double beta1_, beta2_, eps_, wd_;
  std::size_t t_ = 0;
  model::ParamTree<float> m_, v_;
};

}  // namespace dropclip::train
