// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "dropclip/numerics/tensor.hpp"

namespace dropclip::eval {

/// Scores of every (query, candidate) pair, row-major, with the correct
/// candidate of each query.
struct SimilarityMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> scores;
  std::vector<std::size_t> truth;

  double at(std::size_t r, std::size_t c) const { return scores[r * cols + c]; }
  void validate() const;
};

/// q (Nq, P) . c (Nc, P)^T with query i matched to candidate i.
SimilarityMatrix similarity(const numerics::Tensor<float>& queries,
                            const numerics::Tensor<float>& candidates);

struct RetrievalResult {
  double r1 = 0.0;
  double r5 = 0.0;
  double r10 = 0.0;
  double median_rank = 0.0;
};

/// 1 + number of candidates scoring >= the correct one (ties count against).
std::vector<std::size_t> retrieval_ranks(const SimilarityMatrix& sim);

RetrievalResult retrieval_eval(const SimilarityMatrix& sim);

}  // namespace dropclip::eval
