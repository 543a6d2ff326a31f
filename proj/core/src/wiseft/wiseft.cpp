// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "dropclip/wiseft/wiseft.hpp"

#include <cmath>
#include <string>

namespace dropclip::wiseft {

WiseFtSchedule::WiseFtSchedule(std::size_t k, std::size_t l) : k_(k), l_(l) {
  if (k < 1) throw std::invalid_argument("wise-ft: interval k must be at least 1");
  if (l < 2) throw std::invalid_argument("wise-ft: checkpoint count l must be at least 2, got " + std::to_string(l));
}

template <typename T>
model::ParamTree<T> ensemble(std::span<const model::ParamTree<T>* const> trees,
                             std::span<const double> weights) {
  if (trees.empty()) throw std::invalid_argument("ensemble: no checkpoints");
  if (trees.size() != weights.size()) {
    throw std::invalid_argument("ensemble: " + std::to_string(trees.size()) + " checkpoints but " +
                                std::to_string(weights.size()) + " weights");
  }
  double total = 0.0;
  for (double w : weights) total += w;
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("ensemble: weights sum to " + std::to_string(total) + ", expected 1");
  }
  for (std::size_t i = 1; i < trees.size(); ++i) trees[0]->check_same_structure(*trees[i]);

  model::ParamTree<T> out;
  std::vector<double> acc;
  for (const auto& [name, e] : trees[0]->entries()) {
    acc.assign(e.value.size(), 0.0);
    bool first = true;
    for (std::size_t j = 0; j < trees.size(); ++j) {
      if (weights[j] == 0.0) continue;
      const auto x = (*trees[j])[name].data();
      for (std::size_t i = 0; i < acc.size(); ++i) {
        const double term = weights[j] * static_cast<double>(x[i]);
        acc[i] = first ? term : acc[i] + term;
      }
      first = false;
    }
    std::vector<T> data(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i) data[i] = static_cast<T>(acc[i]);
    out.add(name, numerics::Tensor<T>(e.value.shape(), std::move(data)), e.trainable);
  }
  return out;
}

std::vector<std::size_t> alg1_indices(std::size_t n, std::size_t l) {
  if (l < 2) throw std::invalid_argument("alg1_indices: l must be at least 2");
  std::vector<std::size_t> out(l);
  for (std::size_t i = 0; i < l; ++i) {
    // round_half_up(i*n/(l-1)) in exact integer arithmetic
    out[i] = (2 * i * n + (l - 1)) / (2 * (l - 1));
  }
  return out;
}

template <typename T>
model::ParamTree<T> classic_wise_ft(const model::ParamTree<T>& pre, const model::ParamTree<T>& ft,
                                    double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("classic_wise_ft: alpha must lie in [0, 1]");
  const std::vector<const model::ParamTree<T>*> trees{&pre, &ft};
  const std::vector<double> weights{1.0 - alpha, alpha};
  return ensemble<T>(std::span<const model::ParamTree<T>* const>(trees), weights);
}

template <typename T>
model::ParamTree<T> wise_ft_online(CheckpointSeries<T>& series, const WiseFtSchedule& schedule,
                                   std::size_t n) {
  if (!schedule.fires_at(n)) return series.at(n).clone();
  const auto idx = alg1_indices(n, schedule.l());
  std::vector<const model::ParamTree<T>*> trees;
  for (auto i : idx) trees.push_back(&series.at(i));
  const std::vector<double> weights(idx.size(), 1.0 / static_cast<double>(idx.size()));
  auto merged = ensemble<T>(std::span<const model::ParamTree<T>* const>(trees), weights);
  series.replace(n, merged.clone());
  return merged;
}

#define DROPCLIP_INSTANTIATE_WISEFT(T)                                                             \
  template model::ParamTree<T> ensemble<T>(std::span<const model::ParamTree<T>* const>,            \
                                           std::span<const double>);                               \
  template model::ParamTree<T> classic_wise_ft<T>(const model::ParamTree<T>&,                      \
                                                  const model::ParamTree<T>&, double);             \
  template model::ParamTree<T> wise_ft_online<T>(CheckpointSeries<T>&, const WiseFtSchedule&,      \
                                                 std::size_t);

DROPCLIP_INSTANTIATE_WISEFT(float)
DROPCLIP_INSTANTIATE_WISEFT(double)

}  // namespace dropclip::wiseft
