// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>

#include "dropclip/numerics/tensor.hpp"

namespace dropclip::numerics {

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_leaf = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

/// Compares reverse-mode gradients of a scalar function against fourth-order
/// central differences, (8(f(x+h) - f(x-h)) - (f(x+2h) - f(x-2h))) / 12h.
/// The two-point stencil cannot resolve 1e-8 gradients of an O(1) loss: its
/// rounding noise at h=1e-5 is already ~5e-11. Relative error per coordinate
/// is |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
GradCheckResult grad_check(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                           const Tensor<double>& point, double eps = 1e-3);

/// Multi-leaf form: `f` closes over `leaves`, whose storage is perturbed in
/// place and restored afterwards.
GradCheckResult grad_check(const std::function<Tensor<double>()>& f,
                           std::span<Tensor<double>> leaves, double eps = 1e-3);

}  // namespace dropclip::numerics
