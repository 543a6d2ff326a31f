// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "dropclip/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace dropclip::numerics {

namespace {

double evaluate(const std::function<Tensor<double>()>& f) {
  NoGradScope<double> no_grad;
  const double v = f().item();
  if (!std::isfinite(v)) throw NonFiniteError("grad_check: function is not finite at a perturbed point");
  return v;
}

}  // namespace

GradCheckResult grad_check(const std::function<Tensor<double>()>& f,
                           std::span<Tensor<double>> leaves, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("grad_check: eps must be positive");

  std::vector<bool> previous(leaves.size());
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    previous[l] = leaves[l].requires_grad();
    leaves[l].zero_grad();
    leaves[l].set_requires_grad(true);
  }
  std::vector<std::vector<double>> analytic(leaves.size());
  {
    Tape<double> tape;
    TapeScope<double> scope(tape);
    const auto loss = f();
    if (!std::isfinite(loss.item())) throw NonFiniteError("grad_check: function is not finite at the point");
    tape.backward(loss);
  }
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    const auto g = leaves[l].grad();
    analytic[l].assign(leaves[l].size(), 0.0);
    std::copy(g.begin(), g.end(), analytic[l].begin());
    leaves[l].zero_grad();
    leaves[l].set_requires_grad(previous[l]);
  }

  GradCheckResult result;
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    auto data = leaves[l].mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      auto at = [&](double offset) {
        data[i] = saved + offset;
        return evaluate(f);
      };
      const double near = at(eps) - at(-eps);
      const double far = at(2.0 * eps) - at(-2.0 * eps);
      data[i] = saved;
      const double numeric = (8.0 * near - far) / (12.0 * eps);
      const double a = analytic[l][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double err = std::abs(a - numeric) / denom;
      ++result.coordinates;
      if (err > result.max_rel_error || result.coordinates == 1) {
        result.max_rel_error = err;
        result.worst_leaf = l;
        result.worst_index = i;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

GradCheckResult grad_check(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                           const Tensor<double>& point, double eps) {
  Tensor<double> leaf = point.clone();
  std::span<Tensor<double>> leaves(&leaf, 1);
  return grad_check([&]() { return f(leaf); }, leaves, eps);
}

}  // namespace dropclip::numerics
