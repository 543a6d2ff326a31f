// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "dropclip/train/optimizer.hpp"

#include <cmath>

namespace dropclip::train {

bool decays(std::string_view name) {
  if (name == "logit_scale") return false;
  const auto leaf = name.substr(name.rfind('.') + 1);
  if (leaf == "g" || leaf == "b" || leaf.starts_with("b_") || leaf == "b1" || leaf == "b2") return false;
  return true;
}

AdamW::AdamW(double beta1, double beta2, double eps, double weight_decay)
    : beta1_(beta1), beta2_(beta2), eps_(eps), wd_(weight_decay) {}

void AdamW::step(model::ParamTree<float>& params, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const float b1 = static_cast<float>(beta1_);
  const float b2 = static_cast<float>(beta2_);
  for (auto& [name, e] : params.entries()) {
    if (!e.trainable) continue;
    if (!m_.contains(name)) {
      m_.add(name, numerics::Tensor<float>::zeros(e.value.shape()));
      v_.add(name, numerics::Tensor<float>::zeros(e.value.shape()));
    }
    auto m = m_.at(name).mutable_data();
    auto v = v_.at(name).mutable_data();
    auto x = e.value.mutable_data();
    const auto g = e.value.grad();
    const bool has_grad = !g.empty();
    const float decay = decays(name) ? static_cast<float>(lr * wd_) : 0.0f;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const float gi = has_grad ? g[i] : 0.0f;
      m[i] = b1 * m[i] + (1.0f - b1) * gi;
      v[i] = b2 * v[i] + (1.0f - b2) * gi * gi;
      const double mh = m[i] / c1;
      const double vh = v[i] / c2;
      x[i] = static_cast<float>(x[i] - lr * (mh / (std::sqrt(vh) + eps_)) - decay * x[i]);
    }
  }
}

model::ParamTree<float> AdamW::state() const {
  model::ParamTree<float> out;
  for (const auto& [name, e] : m_.entries()) out.add("m." + name, e.value.clone(), false);
  for (const auto& [name, e] : v_.entries()) out.add("v." + name, e.value.clone(), false);
  out.add("t", numerics::Tensor<float>({1}, {static_cast<float>(t_)}), false);
  return out;
}

void AdamW::load_state(const model::ParamTree<float>& state) {
  m_ = {};
  v_ = {};
  for (const auto& [name, e] : state.entries()) {
    if (name.starts_with("m.")) m_.add(name.substr(2), e.value.clone());
    else if (name.starts_with("v.")) v_.add(name.substr(2), e.value.clone());
  }
  t_ = static_cast<std::size_t>(state["t"].item());
}

}  // namespace dropclip::train
