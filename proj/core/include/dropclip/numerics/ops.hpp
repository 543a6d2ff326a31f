// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dropclip/numerics/tensor.hpp"

namespace dropclip::numerics {

// Differentiable ops. Every op records itself on the active tape when at least
// one input requires grad. Broadcasting is limited to leading-batch expansion:
// the second operand's shape may be a proper suffix of the first's.

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);

/// a * s where s holds exactly one scalar (any shape).
template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& a, const Tensor<T>& s);

template <typename T>
Tensor<T> exp(const Tensor<T>& a);

/// Swaps the last two axes.
template <typename T>
Tensor<T> transpose(const Tensor<T>& a);

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape);

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis);

template <typename T>
Tensor<T> slice(const Tensor<T>& a, std::size_t axis, std::size_t begin, std::size_t end);

/// Selects sub-tensors along axis 0; indices may repeat.
template <typename T>
Tensor<T> gather(const Tensor<T>& a, std::span<const std::size_t> indices);

/// Row lookup into a (vocab, dim) table.
template <typename T>
Tensor<T> embedding(const Tensor<T>& table, std::span<const std::int32_t> ids);

/// out[i] = a[i, cols[i]] for a 2-D tensor.
template <typename T>
Tensor<T> pick(const Tensor<T>& a, std::span<const std::size_t> cols);

template <typename T>
Tensor<T> sum(const Tensor<T>& a, std::size_t axis);

template <typename T>
Tensor<T> mean(const Tensor<T>& a, std::size_t axis);

template <typename T>
Tensor<T> sum_all(const Tensor<T>& a);

template <typename T>
Tensor<T> mean_all(const Tensor<T>& a);

template <typename T>
Tensor<T> softmax(const Tensor<T>& a, std::size_t axis);

template <typename T>
Tensor<T> log_softmax(const Tensor<T>& a, std::size_t axis);

/// Normalises over the last axis, then applies gain and bias of that extent.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                     T eps = T(1e-5));

/// Exact (erf) GELU.
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);

/// Unit-normalises each vector along the last axis. Vectors with norm below
/// 1e-12 map to zero and bump zero_norm_warnings().
template <typename T>
Tensor<T> l2_normalize(const Tensor<T>& x);

std::size_t zero_norm_warnings();

/// Which keys each query may attend to. A query attends to every key sharing
/// its segment id; negative ids exclude the row (queries output zero).
struct AttentionLayout {
  std::vector<std::int32_t> query_segment;
  std::vector<std::int32_t> key_segment;
};

/// Multi-head scaled dot-product attention over pre-projected q (Nq, D),
/// k (Nk, D), v (Nk, D).
template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                    std::size_t heads, const AttentionLayout& layout);

/// x (.., in) * w (in, out) + b (out).
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  return add(matmul(x, w), b);
}

/// Mean negative log-likelihood of `targets` under row-wise softmax of `logits`.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const std::size_t> targets) {
  return scale(mean_all(pick(log_softmax(logits, 1), targets)), T(-1));
}

}  // namespace dropclip::numerics
