// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "dropclip/model/param_tree.hpp"

namespace dropclip::wiseft {

/// Ensemble every k epochs over l evenly spaced snapshots.
class WiseFtSchedule {
 public:
  WiseFtSchedule(std::size_t k, std::size_t l);

  std::size_t k() const { return k_; }
  std::size_t l() const { return l_; }
  bool fires_at(std::size_t epoch) const { return epoch > 0 && epoch % k_ == 0; }

 private:
  std::size_t k_;
  std::size_t l_;
};

class SeriesError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Weighted entry-wise average, accumulated in double in list order. Terms
/// with weight exactly zero are skipped. Weights must sum to 1 within 1e-9.
template <typename T>
model::ParamTree<T> ensemble(std::span<const model::ParamTree<T>* const> trees,
                             std::span<const double> weights);

template <typename T>
model::ParamTree<T> ensemble(const std::vector<model::ParamTree<T>>& trees,
                             const std::vector<double>& weights) {
  std::vector<const model::ParamTree<T>*> ptrs;
  for (const auto& t : trees) ptrs.push_back(&t);
  return ensemble<T>(std::span<const model::ParamTree<T>* const>(ptrs), weights);
}

/// round_half_up(i * n / (l - 1)) for i = 0..l-1.
std::vector<std::size_t> alg1_indices(std::size_t n, std::size_t l);

/// (1 - alpha) * pre + alpha * ft.
template <typename T>
model::ParamTree<T> classic_wise_ft(const model::ParamTree<T>& pre, const model::ParamTree<T>& ft,
                                    double alpha);

/// Snapshots theta_0..theta_N in epoch order.
template <typename T>
class CheckpointSeries {
 public:
  void push(model::ParamTree<T> tree) {
    if (!trees_.empty()) tree.check_same_structure(trees_.front());
    trees_.push_back(std::move(tree));
  }
  std::size_t size() const { return trees_.size(); }
  const model::ParamTree<T>& at(std::size_t n) const {
    if (n >= trees_.size()) {
      throw SeriesError("checkpoint series: no snapshot " + std::to_string(n) + " (have " +
                        std::to_string(trees_.size()) + ")");
    }
    return trees_[n];
  }
  void replace(std::size_t n, model::ParamTree<T> tree) {
    at(n).check_same_structure(tree);
    trees_[n] = std::move(tree);
  }

 private:
  std::vector<model::ParamTree<T>> trees_;
};

/// If the schedule fires at n, replaces theta_n with the uniform ensemble over
/// alg1_indices(n, l) and returns it; otherwise returns theta_n unchanged.
template <typename T>
model::ParamTree<T> wise_ft_online(CheckpointSeries<T>& series, const WiseFtSchedule& schedule,
                                   std::size_t n);

}  // namespace dropclip::wiseft
