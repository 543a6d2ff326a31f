// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "dropclip/numerics/ops.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>

namespace dropclip::numerics {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  if (shape.size() == 1) os << ',';
  os << ')';
  return os.str();
}

namespace {

std::atomic<std::size_t> g_zero_norm_warnings{0};

template <typename T>
Tape<T>* recording_tape(std::initializer_list<const Tensor<T>*> inputs) {
  auto* tape = active_tape<T>();
  if (tape == nullptr) return nullptr;
  for (const auto* t : inputs) {
    if (t->requires_grad()) return tape;
  }
  return nullptr;
}

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " +
                   shape_str(b));
}

void check_axis(const char* op, std::size_t axis, std::size_t rank) {
  if (axis >= rank) {
    throw AxisError(std::string(op) + ": axis " + std::to_string(axis) +
                    " out of range for rank " + std::to_string(rank));
  }
}

struct AxisSplit {
  std::size_t outer;
  std::size_t len;
  std::size_t inner;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

// Number of times b repeats inside a under leading-batch expansion.
std::size_t broadcast_reps(const char* op, const Shape& a, const Shape& b) {
  if (a == b) return 1;
  if (b.size() < a.size() && std::equal(b.begin(), b.end(), a.end() - static_cast<long>(b.size()))) {
    const auto bn = shape_size(b);
    return bn == 0 ? 0 : shape_size(a) / bn;
  }
  shape_mismatch(op, a, b);
}

// c(m, n) += a(m, k) * b(k, n)
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    T* ci = c + i * n;
    const T* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = ai[p];
      const T* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

// c(k, n) += a(m, k)^T * g(m, n)
template <typename T>
void gemm_tn(const T* a, const T* g, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* ai = a + i * k;
    const T* gi = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = ai[p];
      T* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += aip * gi[j];
    }
  }
}

template <typename T>
std::vector<T> transposed(const T* b, std::size_t rows, std::size_t cols) {
  std::vector<T> t(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) t[c * rows + r] = b[r * cols + c];
  return t;
}

}  // namespace

std::size_t zero_norm_warnings() { return g_zero_norm_warnings.load(); }

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() < 2 || b.rank() < 2) shape_mismatch("matmul", a.shape(), b.shape());
  const std::size_t k = a.shape().back();
  const std::size_t m = a.shape()[a.rank() - 2];
  const std::size_t n = b.shape().back();
  if (b.shape()[b.rank() - 2] != k) shape_mismatch("matmul", a.shape(), b.shape());
  std::size_t batch = 1;
  bool shared_rhs = b.rank() == 2;
  if (!shared_rhs) {
    if (b.rank() != a.rank() ||
        !std::equal(a.shape().begin(), a.shape().end() - 2, b.shape().begin())) {
      shape_mismatch("matmul", a.shape(), b.shape());
    }
    for (std::size_t i = 0; i + 2 < a.rank(); ++i) batch *= a.shape()[i];
  }
  Shape out_shape = a.shape();
  out_shape.back() = n;
  std::vector<T> out(shape_size(out_shape), T(0));
  const T* ad = a.data().data();
  const T* bd = b.data().data();
  if (shared_rhs) {
    gemm_nn(ad, bd, out.data(), a.size() / k, k, n);
  } else {
    for (std::size_t s = 0; s < batch; ++s)
      gemm_nn(ad + s * m * k, bd + s * k * n, out.data() + s * m * n, m, k, n);
  }
  Tensor<T> result(std::move(out_shape), std::move(out));
  if (auto* tape = recording_tape({&a, &b})) {
    auto an = a.node(), bn = b.node(), on = result.node();
    tape->record("matmul", {an, bn}, on, [an, bn, on, m, k, n, batch, shared_rhs]() {
      const T* g = on->grad.data();
      if (shared_rhs) {
        const std::size_t rows = an->data.size() / k;
        if (an->requires_grad) {
          auto bt = transposed(bn->data.data(), k, n);
          gemm_nn(g, bt.data(), an->grad.data(), rows, n, k);
        }
        if (bn->requires_grad) gemm_tn(an->data.data(), g, bn->grad.data(), rows, k, n);
        return;
      }
      for (std::size_t s = 0; s < batch; ++s) {
        const T* gs = g + s * m * n;
        if (an->requires_grad) {
          auto bt = transposed(bn->data.data() + s * k * n, k, n);
          gemm_nn(gs, bt.data(), an->grad.data() + s * m * k, m, n, k);
        }
        if (bn->requires_grad)
          gemm_tn(an->data.data() + s * m * k, gs, bn->grad.data() + s * k * n, m, k, n);
      }
    });
  }
  return result;
}

namespace {

enum class Binary { add, sub, mul };

template <typename T>
Tensor<T> binary(const char* op, Binary kind, const Tensor<T>& a, const Tensor<T>& b) {
  const std::size_t reps = broadcast_reps(op, a.shape(), b.shape());
  const std::size_t bn = b.size();
  std::vector<T> out(a.size());
  const T* ad = a.data().data();
  const T* bd = b.data().data();
  for (std::size_t r = 0; r < reps; ++r) {
    const T* ar = ad + r * bn;
    T* orow = out.data() + r * bn;
    switch (kind) {
      case Binary::add:
        for (std::size_t j = 0; j < bn; ++j) orow[j] = ar[j] + bd[j];
        break;
      case Binary::sub:
        for (std::size_t j = 0; j < bn; ++j) orow[j] = ar[j] - bd[j];
        break;
      case Binary::mul:
        for (std::size_t j = 0; j < bn; ++j) orow[j] = ar[j] * bd[j];
        break;
    }
  }
  Tensor<T> result(a.shape(), std::move(out));
  if (auto* tape = recording_tape({&a, &b})) {
    auto an = a.node(), bnode = b.node(), on = result.node();
    tape->record(op, {an, bnode}, on, [an, bnode, on, reps, bn, kind]() {
      const T* g = on->grad.data();
      for (std::size_t r = 0; r < reps; ++r) {
        const T* gr = g + r * bn;
        if (an->requires_grad) {
          T* ga = an->grad.data() + r * bn;
          if (kind == Binary::mul) {
            const T* bd = bnode->data.data();
            for (std::size_t j = 0; j < bn; ++j) ga[j] += gr[j] * bd[j];
          } else {
            for (std::size_t j = 0; j < bn; ++j) ga[j] += gr[j];
          }
        }
        if (bnode->requires_grad) {
          T* gb = bnode->grad.data();
          if (kind == Binary::mul) {
            const T* ar = an->data.data() + r * bn;
            for (std::size_t j = 0; j < bn; ++j) gb[j] += gr[j] * ar[j];
          } else if (kind == Binary::sub) {
            for (std::size_t j = 0; j < bn; ++j) gb[j] -= gr[j];
          } else {
            for (std::size_t j = 0; j < bn; ++j) gb[j] += gr[j];
          }
        }
      }
    });
  }
  return result;
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary("add", Binary::add, a, b);
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary("sub", Binary::sub, a, b);
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary("mul", Binary::mul, a, b);
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  std::vector<T> out(a.data().begin(), a.data().end());
  for (auto& x : out) x *= factor;
  Tensor<T> result(a.shape(), std::move(out));
  if (auto* tape = recording_tape({&a})) {
    auto an = a.node(), on = result.node();
    tape->record("scale", {an}, on, [an, on, factor]() {
      for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i] * factor;
    });
  }
  return result;
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& a, const Tensor<T>& s) {
  if (s.size() != 1) shape_mismatch("mul_scalar", a.shape(), s.shape());
  const T factor = s.data()[0];
  std::vector<T> out(a.data().begin(), a.data().end());
  for (auto& x : out) x *= factor;
  Tensor<T> result(a.shape(), std::move(out));
  if (auto* tape = recording_tape({&a, &s})) {
    auto an = a.node(), sn = s.node(), on = result.node();
    tape->record("mul_scalar", {an, sn}, on, [an, sn, on]() {
      const T f = sn->data[0];
      const auto& g = on->grad;
      if (an->requires_grad)
        for (std::size_t i = 0; i < g.size(); ++i) an->grad[i] += g[i] * f;
      if (sn->requires_grad) {
        T acc = T(0);
        for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * an->data[i];
        sn->grad[0] += acc;
      }
    });
  }
  return result;
}

template <typename T>
Tensor<T> exp(const Tensor<T>& a) {
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(a.data()[i]);
  Tensor<T> result(a.shape(), std::move(out));
  if (auto* tape = recording_tape({&a})) {
    auto an = a.node(), on = result.node();
    tape->record("exp", {an}, on, [an, on]() {
      for (std::size_t i = 0; i < on->grad.size(); ++i)
        an->grad[i] += on->grad[i] * on->data[i];
    });
  }
  return result;
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  if (a.rank() < 2) throw ShapeError("transpose: needs rank >= 2, got " + shape_str(a.shape()));
  const std::size_t rows = a.shape()[a.rank() - 2];
  const std::size_t cols = a.shape().back();
  const std::size_t batch = rows * cols == 0 ? 0 : a.size() / (rows * cols);
  std::vector<T> out(a.size());
  for (std::size_t s = 0; s < batch; ++s) {
    const T* src = a.data().data() + s * rows * cols;
    T* dst = out.data() + s * rows * cols;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
  }
  Shape shape = a.shape();
  std::swap(shape[shape.size() - 1], shape[shape.size() - 2]);
  Tensor<T> result(std::move(shape), std::move(out));
  if (auto* tape = recording_tape({&a})) {
    auto an = a.node(), on = result.node();
    tape->record("transpose", {an}, on, [an, on, rows, cols, batch]() {
      for (std::size_t s = 0; s < batch; ++s) {
        const T* g = on->grad.data() + s * rows * cols;
        T* ga = an->grad.data() + s * rows * cols;
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += g[c * rows + r];
      }
    });
  }
  return result;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (shape_size(shape) != a.size()) shape_mismatch("reshape", a.shape(), shape);
  Tensor<T> result(std::move(shape), std::vector<T>(a.data().begin(), a.data().end()));
  if (auto* tape = recording_tape({&a})) {
    auto an = a.node(), on = result.node();
    tape->record("reshape", {an}, on, [an, on]() {
      for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i];
    });
  }
  return result;
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const auto& first = parts.front().shape();
  check_axis("concat", axis, first.size());
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const auto& s = p.shape();
    if (s.size() != first.size()) shape_mismatch("concat", first, s);
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) shape_mismatch("concat", first, s);
    }
    out_shape[axis] += s[axis];
  }
  const auto split = split_at(out_shape, axis);
  std::vector<T> out(shape_size(out_shape));
  std::vector<std::size_t> chunk(parts.size());
  std::size_t offset = 0;
  std::vector<std::size_t> offsets(parts.size());
  for (std::size_t p = 0; p < parts.size(); ++p) {
    chunk[p] = parts[p].shape()[axis] * split.inner;
    offsets[p] = offset;
    offset += chunk[p];
  }
  const std::size_t row = split.len * split.inner;
  for (std::size_t o = 0; o < split.outer; ++o) {
    for (std::size_t p = 0; p < parts.size(); ++p) {
      const T* src = parts[p].data().data() + o * chunk[p];
      std::copy(src, src + chunk[p], out.data() + o * row + offsets[p]);
    }
  }
  Tensor<T> result(std::move(out_shape), std::move(out));
  auto* tape = active_tape<T>();
  const bool any_grad =
      std::any_of(parts.begin(), parts.end(), [](const auto& p) { return p.requires_grad(); });
  if (tape != nullptr && any_grad) {
    std::vector<typename Tensor<T>::NodePtr> nodes;
    nodes.reserve(parts.size());
    for (const auto& p : parts) nodes.push_back(p.node());
    auto on = result.node();
    tape->record("concat", nodes, on, [nodes, on, chunk, offsets, row, outer = split.outer]() {
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t p = 0; p < nodes.size(); ++p) {
          if (!nodes[p]->requires_grad) continue;
          const T* g = on->grad.data() + o * row + offsets[p];
          T* gp = nodes[p]->grad.data() + o * chunk[p];
          for (std::size_t i = 0; i < chunk[p]; ++i) gp[i] += g[i];
        }
      }
    });
  }
  return result;
}

template <typename T>
Tensor<T> slice(const Tensor<T>& a, std::size_t axis, std::size_t begin, std::size_t end) {
  check_axis("slice", axis, a.rank());
  if (begin > end || end > a.shape()[axis]) {
    throw AxisError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                    ") out of bounds for axis " + std::to_string(axis) + " of " +
                    shape_str(a.shape()));
  }
  const auto split = split_at(a.shape(), axis);
  Shape out_shape = a.shape();
  out_shape[axis] = end - begin;
  const std::size_t in_row = split.len * split.inner;
  const std::size_t out_row = (end - begin) * split.inner;
  const std::size_t start = begin * split.inner;
  std::vector<T> out(shape_size(out_shape));
  for (std::size_t o = 0; o < split.outer; ++o) {
    const T* src = a.data().data() + o * in_row + start;
    std::copy(src, src + out_row, out.data() + o * out_row);
  }
  Tensor<T> result(std::move(out_shape), std::move(out));
  if (auto* tape = recording_tape({&a})) {
    auto an = a.node(), on = result.node();
    tape->record("slice", {an}, on, [an, on, in_row, out_row, start, outer = split.outer]() {
      for (std::size_t o = 0; o < outer; ++o) {
        const T* g = on->grad.data() + o * out_row;
        T* ga = an->grad.data() + o * in_row + start;
        for (std::size_t i = 0; i < out_row; ++i) ga[i] += g[i];
      }
    });
  }
  return result;
}

template <typename T>
Tensor<T> gather(const Tensor<T>& a, std::span<const std::size_t> indices) {
  if (a.rank() < 1) throw ShapeError("gather: needs rank >= 1");
  const std::size_t rows = a.shape()[0];
  const std::size_t block = rows == 0 ? 0 : a.size() / rows;
  Shape out_shape = a.shape();
  out_shape[0] = indices.size();
  std::vector<T> out(indices.size() * block);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows) {
      throw AxisError("gather: index " + std::to_string(indices[i]) + " out of range for " +
                      std::to_string(rows) + " rows");
    }
    const T* src = a.data().data() + indices[i] * block;
    std::copy(src, src + block, out.data() + i * block);
  }
  Tensor<T> result(std::move(out_shape), std::move(out));
  if (auto* tape = recording_tape({&a})) {
    auto an = a.node(), on = result.node();
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    tape->record("gather", {an}, on, [an, on, idx = std::move(idx), block]() {
      for (std::size_t i = 0; i < idx.size(); ++i) {
        const T* g = on->grad.data() + i * block;
        T* ga = an->grad.data() + idx[i] * block;
        for (std::size_t j = 0; j < block; ++j) ga[j] += g[j];
      }
    });
  }
  return result;
}

template <typename T>
Tensor<T> embedding(const Tensor<T>& table, std::span<const std::int32_t> ids) {
  if (table.rank() != 2) throw ShapeError("embedding: table must be 2-D, got " + shape_str(table.shape()));
  std::vector<std::size_t> rows(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= table.dim(0)) {
      throw AxisError("embedding: id " + std::to_string(ids[i]) + " out of range for vocabulary " +
                      std::to_string(table.dim(0)));
    }
    rows[i] = static_cast<std::size_t>(ids[i]);
  }
  return gather(table, std::span<const std::size_t>(rows));
}

template <typename T>
Tensor<T> pick(const Tensor<T>& a, std::span<const std::size_t> cols) {
  if (a.rank() != 2 || cols.size() != a.dim(0)) {
    throw ShapeError("pick: expected 2-D input with one column per row, got " +
                     shape_str(a.shape()) + " and " + std::to_string(cols.size()) + " columns");
  }
  const std::size_t n = a.dim(1);
  std::vector<T> out(cols.size());
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (cols[i] >= n) {
      throw AxisError("pick: column " + std::to_string(cols[i]) + " out of range for width " +
                      std::to_string(n));
    }
    out[i] = a.data()[i * n + cols[i]];
  }
  Tensor<T> result(Shape{cols.size()}, std::move(out));
  if (auto* tape = recording_tape({&a})) {
    auto an = a.node(), on = result.node();
    std::vector<std::size_t> c(cols.begin(), cols.end());
    tape->record("pick", {an}, on, [an, on, c = std::move(c), n]() {
      for (std::size_t i = 0; i < c.size(); ++i) an->grad[i * n + c[i]] += on->grad[i];
    });
  }
  return result;
}

namespace {

template <typename T>
Tensor<T> reduce_axis(const char* op, const Tensor<T>& a, std::size_t axis, bool average) {
  check_axis(op, axis, a.rank());
  const auto split = split_at(a.shape(), axis);
  Shape out_shape = a.shape();
  out_shape.erase(out_shape.begin() + static_cast<long>(axis));
  const T factor = average ? T(1) / static_cast<T>(split.len) : T(1);
  std::vector<T> out(split.outer * split.inner, T(0));
  const T* ad = a.data().data();
  for (std::size_t o = 0; o < split.outer; ++o) {
    T* dst = out.data() + o * split.inner;
    for (std::size_t l = 0; l < split.len; ++l) {
      const T* src = ad + (o * split.len + l) * split.inner;
      for (std::size_t i = 0; i < split.inner; ++i) dst[i] += src[i];
    }
    if (average)
      for (std::size_t i = 0; i < split.inner; ++i) dst[i] *= factor;
  }
  Tensor<T> result(std::move(out_shape), std::move(out));
  if (auto* tape = recording_tape({&a})) {
    auto an = a.node(), on = result.node();
    tape->record(op, {an}, on, [an, on, split, factor]() {
      for (std::size_t o = 0; o < split.outer; ++o) {
        const T* g = on->grad.data() + o * split.inner;
        for (std::size_t l = 0; l < split.len; ++l) {
          T* ga = an->grad.data() + (o * split.len + l) * split.inner;
          for (std::size_t i = 0; i < split.inner; ++i) ga[i] += g[i] * factor;
        }
      }
    });
  }
  return result;
}

}  // namespace

template <typename T>
Tensor<T> sum(const Tensor<T>& a, std::size_t axis) {
  return reduce_axis("sum", a, axis, false);
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a, std::size_t axis) {
  return reduce_axis("mean", a, axis, true);
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& a) {
  return reduce_axis("sum_all", reshape(a, Shape{a.size()}), 0, false);
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& a) {
  return reduce_axis("mean_all", reshape(a, Shape{a.size()}), 0, true);
}

namespace {

template <typename T>
Tensor<T> softmax_impl(const char* op, const Tensor<T>& a, std::size_t axis, bool log_space) {
  check_axis(op, axis, a.rank());
  const auto split = split_at(a.shape(), axis);
  std::vector<T> out(a.size());
  const T* ad = a.data().data();
  for (std::size_t o = 0; o < split.outer; ++o) {
    for (std::size_t i = 0; i < split.inner; ++i) {
      const std::size_t base = o * split.len * split.inner + i;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t l = 0; l < split.len; ++l) mx = std::max(mx, ad[base + l * split.inner]);
      T total = T(0);
      for (std::size_t l = 0; l < split.len; ++l) total += std::exp(ad[base + l * split.inner] - mx);
      if (log_space) {
        const T lse = mx + std::log(total);
        for (std::size_t l = 0; l < split.len; ++l)
          out[base + l * split.inner] = ad[base + l * split.inner] - lse;
      } else {
        for (std::size_t l = 0; l < split.len; ++l)
          out[base + l * split.inner] = std::exp(ad[base + l * split.inner] - mx) / total;
      }
    }
  }
  Tensor<T> result(a.shape(), std::move(out));
  if (auto* tape = recording_tape({&a})) {
    auto an = a.node(), on = result.node();
    tape->record(op, {an}, on, [an, on, split, log_space]() {
      const T* y = on->data.data();
      const T* g = on->grad.data();
      T* ga = an->grad.data();
      for (std::size_t o = 0; o < split.outer; ++o) {
        for (std::size_t i = 0; i < split.inner; ++i) {
          const std::size_t base = o * split.len * split.inner + i;
          T dot = T(0);
          if (log_space) {
            for (std::size_t l = 0; l < split.len; ++l) dot += g[base + l * split.inner];
            for (std::size_t l = 0; l < split.len; ++l) {
              const std::size_t at = base + l * split.inner;
              ga[at] += g[at] - std::exp(y[at]) * dot;
            }
          } else {
            for (std::size_t l = 0; l < split.len; ++l) {
              const std::size_t at = base + l * split.inner;
              dot += g[at] * y[at];
            }
            for (std::size_t l = 0; l < split.len; ++l) {
              const std::size_t at = base + l * split.inner;
              ga[at] += y[at] * (g[at] - dot);
            }
          }
        }
      }
    });
  }
  return result;
}

}  // namespace

template <typename T>
Tensor<T> softmax(const Tensor<T>& a, std::size_t axis) {
  return softmax_impl("softmax", a, axis, false);
}

template <typename T>
Tensor<T> log_softmax(const Tensor<T>& a, std::size_t axis) {
  return softmax_impl("log_softmax", a, axis, true);
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
  if (x.rank() < 1) throw ShapeError("layer_norm: needs rank >= 1");
  const std::size_t d = x.shape().back();
  if (gain.size() != d || bias.size() != d) {
    throw ShapeError("layer_norm: gain/bias " + shape_str(gain.shape()) + "/" +
                     shape_str(bias.shape()) + " do not match feature dim " + std::to_string(d));
  }
  const std::size_t rows = d == 0 ? 0 : x.size() / d;
  std::vector<T> out(x.size());
  auto xhat = std::make_shared<std::vector<T>>(x.size());
  auto rstd = std::make_shared<std::vector<T>>(rows);
  const T* xd = x.data().data();
  const T* gd = gain.data().data();
  const T* bd = bias.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = xd + r * d;
    T mu = T(0);
    for (std::size_t j = 0; j < d; ++j) mu += xr[j];
    mu /= static_cast<T>(d);
    T var = T(0);
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<T>(d);
    const T rs = T(1) / std::sqrt(var + eps);
    (*rstd)[r] = rs;
    for (std::size_t j = 0; j < d; ++j) {
      const T h = (xr[j] - mu) * rs;
      (*xhat)[r * d + j] = h;
      out[r * d + j] = h * gd[j] + bd[j];
    }
  }
  Tensor<T> result(x.shape(), std::move(out));
  if (auto* tape = recording_tape({&x, &gain, &bias})) {
    auto xn = x.node(), gn = gain.node(), bn = bias.node(), on = result.node();
    tape->record(
        "layer_norm", {xn, gn, bn}, on,
        [xn, gn, bn, on, xhat, rstd, rows, d]() {
          const T* g = on->grad.data();
          const T* gd = gn->data.data();
          std::vector<T> dh(d);
          for (std::size_t r = 0; r < rows; ++r) {
            const T* gr = g + r * d;
            const T* hr = xhat->data() + r * d;
            if (gn->requires_grad)
              for (std::size_t j = 0; j < d; ++j) gn->grad[j] += gr[j] * hr[j];
            if (bn->requires_grad)
              for (std::size_t j = 0; j < d; ++j) bn->grad[j] += gr[j];
            if (!xn->requires_grad) continue;
            T mean_dh = T(0), mean_dhh = T(0);
            for (std::size_t j = 0; j < d; ++j) {
              dh[j] = gr[j] * gd[j];
              mean_dh += dh[j];
              mean_dhh += dh[j] * hr[j];
            }
            mean_dh /= static_cast<T>(d);
            mean_dhh /= static_cast<T>(d);
            T* gx = xn->grad.data() + r * d;
            const T rs = (*rstd)[r];
            for (std::size_t j = 0; j < d; ++j) gx[j] += rs * (dh[j] - mean_dh - hr[j] * mean_dhh);
          }
        },
        x.size() + rows);
  }
  return result;
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  const T inv_sqrt2 = T(0.70710678118654752440);
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T v = x.data()[i];
    out[i] = T(0.5) * v * (T(1) + std::erf(v * inv_sqrt2));
  }
  Tensor<T> result(x.shape(), std::move(out));
  if (auto* tape = recording_tape({&x})) {
    auto xn = x.node(), on = result.node();
    tape->record("gelu", {xn}, on, [xn, on, inv_sqrt2]() {
      const T inv_sqrt_2pi = T(0.39894228040143267794);
      for (std::size_t i = 0; i < on->grad.size(); ++i) {
        const T v = xn->data[i];
        const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
        const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * v * v);
        xn->grad[i] += on->grad[i] * (cdf + v * pdf);
      }
    });
  }
  return result;
}

template <typename T>
Tensor<T> l2_normalize(const Tensor<T>& x) {
  if (x.rank() < 1) throw ShapeError("l2_normalize: needs rank >= 1");
  const std::size_t d = x.shape().back();
  const std::size_t rows = d == 0 ? 0 : x.size() / d;
  std::vector<T> out(x.size(), T(0));
  auto norms = std::make_shared<std::vector<T>>(rows, T(0));
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x.data().data() + r * d;
    T ss = T(0);
    for (std::size_t j = 0; j < d; ++j) ss += xr[j] * xr[j];
    const T norm = std::sqrt(ss);
    if (!(norm >= T(1e-12))) {
      g_zero_norm_warnings.fetch_add(1);
      continue;
    }
    (*norms)[r] = norm;
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] = xr[j] / norm;
  }
  Tensor<T> result(x.shape(), std::move(out));
  if (auto* tape = recording_tape({&x})) {
    auto xn = x.node(), on = result.node();
    tape->record(
        "l2_normalize", {xn}, on,
        [xn, on, norms, rows, d]() {
          for (std::size_t r = 0; r < rows; ++r) {
            const T norm = (*norms)[r];
            if (norm == T(0)) continue;
            const T* y = on->data.data() + r * d;
            const T* g = on->grad.data() + r * d;
            T dot = T(0);
            for (std::size_t j = 0; j < d; ++j) dot += y[j] * g[j];
            T* gx = xn->grad.data() + r * d;
            for (std::size_t j = 0; j < d; ++j) gx[j] += (g[j] - y[j] * dot) / norm;
          }
        },
        rows);
  }
  return result;
}

namespace {

struct KeyIndex {
  std::vector<std::vector<std::size_t>> by_segment;

  const std::vector<std::size_t>* keys_for(std::int32_t segment) const {
    if (segment < 0 || static_cast<std::size_t>(segment) >= by_segment.size()) return nullptr;
    return &by_segment[static_cast<std::size_t>(segment)];
  }
};

}  // namespace

template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                    std::size_t heads, const AttentionLayout& layout) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2 || k.shape() != v.shape() ||
      q.dim(1) != k.dim(1)) {
    throw ShapeError("attention: expected q (Nq, D), k/v (Nk, D); got " + shape_str(q.shape()) +
                     ", " + shape_str(k.shape()) + ", " + shape_str(v.shape()));
  }
  const std::size_t nq = q.dim(0), nk = k.dim(0), d = q.dim(1);
  if (heads == 0 || d % heads != 0) {
    throw ShapeError("attention: dim " + std::to_string(d) + " not divisible by " +
                     std::to_string(heads) + " heads");
  }
  if (layout.query_segment.size() != nq || layout.key_segment.size() != nk) {
    throw ShapeError("attention: layout covers " + std::to_string(layout.query_segment.size()) +
                     " queries / " + std::to_string(layout.key_segment.size()) +
                     " keys, inputs have " + std::to_string(nq) + " / " + std::to_string(nk));
  }
  const std::size_t dh = d / heads;
  const T sc = T(1) / std::sqrt(static_cast<T>(dh));

  auto index = std::make_shared<KeyIndex>();
  std::int32_t max_seg = -1;
  for (auto s : layout.key_segment) max_seg = std::max(max_seg, s);
  index->by_segment.resize(static_cast<std::size_t>(max_seg + 1));
  for (std::size_t j = 0; j < nk; ++j) {
    if (layout.key_segment[j] >= 0)
      index->by_segment[static_cast<std::size_t>(layout.key_segment[j])].push_back(j);
  }
  auto qseg = std::make_shared<std::vector<std::int32_t>>(layout.query_segment);

  std::vector<std::size_t> offsets(nq + 1, 0);
  for (std::size_t i = 0; i < nq; ++i) {
    const auto* keys = index->keys_for((*qseg)[i]);
    offsets[i + 1] = offsets[i] + (keys ? keys->size() * heads : 0);
  }
  auto probs = std::make_shared<std::vector<T>>(offsets[nq]);
  auto poff = std::make_shared<std::vector<std::size_t>>(std::move(offsets));

  std::vector<T> out(nq * d, T(0));
  const T* qd = q.data().data();
  const T* kd = k.data().data();
  const T* vd = v.data().data();
  for (std::size_t i = 0; i < nq; ++i) {
    const auto* keys = index->keys_for((*qseg)[i]);
    if (keys == nullptr || keys->empty()) continue;
    const std::size_t nkeys = keys->size();
    for (std::size_t h = 0; h < heads; ++h) {
      T* p = probs->data() + (*poff)[i] + h * nkeys;
      const T* qi = qd + i * d + h * dh;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t a = 0; a < nkeys; ++a) {
        const T* kj = kd + (*keys)[a] * d + h * dh;
        T s = T(0);
        for (std::size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
        p[a] = s * sc;
        mx = std::max(mx, p[a]);
      }
      T total = T(0);
      for (std::size_t a = 0; a < nkeys; ++a) {
        p[a] = std::exp(p[a] - mx);
        total += p[a];
      }
      T* oi = out.data() + i * d + h * dh;
      for (std::size_t a = 0; a < nkeys; ++a) {
        p[a] /= total;
        const T* vj = vd + (*keys)[a] * d + h * dh;
        for (std::size_t c = 0; c < dh; ++c) oi[c] += p[a] * vj[c];
      }
    }
  }
  Tensor<T> result(Shape{nq, d}, std::move(out));
  if (auto* tape = recording_tape({&q, &k, &v})) {
    auto qn = q.node(), kn = k.node(), vn = v.node(), on = result.node();
    const std::size_t saved = probs->size();
    tape->record(
        "attention", {qn, kn, vn}, on,
        [qn, kn, vn, on, index, qseg, probs, poff, nq, d, dh, heads, sc]() {
          std::vector<T> dp;
          for (std::size_t i = 0; i < nq; ++i) {
            const auto* keys = index->keys_for((*qseg)[i]);
            if (keys == nullptr || keys->empty()) continue;
            const std::size_t nkeys = keys->size();
            dp.resize(nkeys);
            for (std::size_t h = 0; h < heads; ++h) {
              const T* p = probs->data() + (*poff)[i] + h * nkeys;
              const T* go = on->grad.data() + i * d + h * dh;
              T weighted = T(0);
              for (std::size_t a = 0; a < nkeys; ++a) {
                const std::size_t j = (*keys)[a];
                const T* vj = vn->data.data() + j * d + h * dh;
                T s = T(0);
                for (std::size_t c = 0; c < dh; ++c) s += go[c] * vj[c];
                dp[a] = s;
                weighted += p[a] * s;
                if (vn->requires_grad) {
                  T* gv = vn->grad.data() + j * d + h * dh;
                  for (std::size_t c = 0; c < dh; ++c) gv[c] += p[a] * go[c];
                }
              }
              const T* qi = qn->data.data() + i * d + h * dh;
              T* gq = qn->requires_grad ? qn->grad.data() + i * d + h * dh : nullptr;
              for (std::size_t a = 0; a < nkeys; ++a) {
                const std::size_t j = (*keys)[a];
                const T ds = p[a] * (dp[a] - weighted) * sc;
                if (gq != nullptr) {
                  const T* kj = kn->data.data() + j * d + h * dh;
                  for (std::size_t c = 0; c < dh; ++c) gq[c] += ds * kj[c];
                }
                if (kn->requires_grad) {
                  T* gk = kn->grad.data() + j * d + h * dh;
                  for (std::size_t c = 0; c < dh; ++c) gk[c] += ds * qi[c];
                }
              }
            }
          }
        },
        saved);
  }
  return result;
}

#define DROPCLIP_INSTANTIATE_OPS(T)                                                            \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> scale(const Tensor<T>&, T);                                               \
  template Tensor<T> mul_scalar(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> exp(const Tensor<T>&);                                                    \
  template Tensor<T> transpose(const Tensor<T>&);                                              \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                         \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);                       \
  template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t, std::size_t);           \
  template Tensor<T> gather(const Tensor<T>&, std::span<const std::size_t>);                   \
  template Tensor<T> embedding(const Tensor<T>&, std::span<const std::int32_t>);               \
  template Tensor<T> pick(const Tensor<T>&, std::span<const std::size_t>);                     \
  template Tensor<T> sum(const Tensor<T>&, std::size_t);                                       \
  template Tensor<T> mean(const Tensor<T>&, std::size_t);                                      \
  template Tensor<T> sum_all(const Tensor<T>&);                                                \
  template Tensor<T> mean_all(const Tensor<T>&);                                               \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                                   \
  template Tensor<T> log_softmax(const Tensor<T>&, std::size_t);                               \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);      \
  template Tensor<T> gelu(const Tensor<T>&);                                                   \
  template Tensor<T> l2_normalize(const Tensor<T>&);                                           \
  template Tensor<T> attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,           \
                               std::size_t, const AttentionLayout&);

DROPCLIP_INSTANTIATE_OPS(float)
DROPCLIP_INSTANTIATE_OPS(double)

#undef DROPCLIP_INSTANTIATE_OPS

}  // namespace dropclip::numerics
