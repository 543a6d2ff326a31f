// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "dropclip/eval/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dropclip::eval {

void SimilarityMatrix::validate() const {
  if (rows == 0) throw std::invalid_argument("similarity matrix: no rows");
  if (scores.size() != rows * cols || truth.size() != rows) {
    throw std::invalid_argument("similarity matrix: inconsistent sizes");
  }
  for (std::size_t r = 0; r < rows; ++r) {
    if (truth[r] >= cols) {
      throw std::invalid_argument("similarity matrix: row " + std::to_string(r) + " ground truth " +
                                  std::to_string(truth[r]) + " outside " + std::to_string(cols) + " columns");
    }
  }
  for (double s : scores) {
    if (!std::isfinite(s)) throw std::invalid_argument("similarity matrix: non-finite score");
  }
}

SimilarityMatrix similarity(const numerics::Tensor<float>& q, const numerics::Tensor<float>& c) {
  if (q.rank() != 2 || c.rank() != 2 || q.dim(1) != c.dim(1)) {
    throw numerics::ShapeError("similarity: queries " + numerics::shape_str(q.shape()) + " vs candidates " +
                               numerics::shape_str(c.shape()));
  }
  if (q.dim(0) > c.dim(0)) throw std::invalid_argument("similarity: fewer candidates than queries");
  SimilarityMatrix sim;
  sim.rows = q.dim(0);
  sim.cols = c.dim(0);
  const auto p = q.dim(1);
  const auto qd = q.data();
  const auto cd = c.data();
  sim.scores.resize(sim.rows * sim.cols);
  for (std::size_t i = 0; i < sim.rows; ++i) {
    for (std::size_t j = 0; j < sim.cols; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < p; ++k) s += static_cast<double>(qd[i * p + k]) * cd[j * p + k];
      sim.scores[i * sim.cols + j] = s;
    }
    sim.truth.push_back(i);
  }
  return sim;
}

std::vector<std::size_t> retrieval_ranks(const SimilarityMatrix& sim) {
  sim.validate();
  std::vector<std::size_t> ranks(sim.rows);
  for (std::size_t r = 0; r < sim.rows; ++r) {
    const double target = sim.at(r, sim.truth[r]);
    std::size_t better = 0;
    for (std::size_t c = 0; c < sim.cols; ++c) {
      if (c != sim.truth[r] && sim.at(r, c) >= target) ++better;
    }
    ranks[r] = better + 1;
  }
  return ranks;
}

RetrievalResult retrieval_eval(const SimilarityMatrix& sim) {
  auto ranks = retrieval_ranks(sim);
  const double n = static_cast<double>(ranks.size());
  auto recall = [&](std::size_t k) {
    const auto hits = std::count_if(ranks.begin(), ranks.end(), [k](std::size_t r) { return r <= k; });
    return 100.0 * static_cast<double>(hits) / n;
  };
  RetrievalResult out{recall(1), recall(5), recall(10), 0.0};
  std::sort(ranks.begin(), ranks.end());
  const auto m = ranks.size();
  out.median_rank = m % 2 == 1 ? static_cast<double>(ranks[m / 2])
                               : 0.5 * static_cast<double>(ranks[m / 2 - 1] + ranks[m / 2]);
  return out;
}

}  // namespace dropclip::eval
