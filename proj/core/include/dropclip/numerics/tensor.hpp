// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dropclip::numerics {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class AxisError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class GradError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

template <typename T>
class Tape;

template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> data;
  // Empty until a backward pass (or the optimizer) allocates it.
  std::vector<T> grad;
  bool requires_grad = false;
  // Tape that recorded the op producing this node; null for leaves.
  const Tape<T>* producer = nullptr;
};

/// Dense row-major array with optional participation in reverse-mode
/// differentiation. Copies share storage; use clone() for a deep copy.
template <typename T>
class Tensor {
 public:
  using value_type = T;
  using NodePtr = std::shared_ptr<TensorNode<T>>;

  Tensor() : Tensor(Shape{}, std::vector<T>{T(0)}) {}

  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false)
      : node_(std::make_shared<TensorNode<T>>()) {
    if (shape_size(shape) != data.size()) {
      throw ShapeError("tensor: shape " + shape_str(shape) + " holds " +
                       std::to_string(shape_size(shape)) + " scalars, got " +
                       std::to_string(data.size()));
    }
    node_->shape = std::move(shape);
    node_->data = std::move(data);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape) {
    const auto n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<T>(n, T(0)));
  }

  static Tensor full(Shape shape, T value) {
    const auto n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<T>(n, value));
  }

  static Tensor scalar(T value) { return Tensor(Shape{}, std::vector<T>{value}); }

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->data.size(); }
  std::size_t dim(std::size_t axis) const {
    if (axis >= rank()) {
      throw AxisError("dim: axis " + std::to_string(axis) + " out of range for shape " +
                      shape_str(shape()));
    }
    return node_->shape[axis];
  }

  std::span<const T> data() const { return node_->data; }
  // Direct writes bypass the tape; intended for initialisation and optimizer updates.
  std::span<T> mutable_data() { return node_->data; }

  T item() const {
    if (size() != 1) {
      throw ShapeError("item: tensor of shape " + shape_str(shape()) + " is not a scalar");
    }
    return node_->data[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool value) { node_->requires_grad = value; }

  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() {
    if (node_->grad.empty()) node_->grad.assign(node_->data.size(), T(0));
    return node_->grad;
  }
  void zero_grad() { node_->grad.clear(); }

  Tensor clone() const { return Tensor(node_->shape, node_->data); }

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

/// Ordered record of differentiable ops executed while the tape was active.
/// Single-threaded; never share a tape across threads.
template <typename T>
class Tape {
 public:
  using NodePtr = std::shared_ptr<TensorNode<T>>;

  struct Entry {
    const char* op;
    std::vector<NodePtr> inputs;
    NodePtr output;
    std::function<void()> backward;
    std::size_t saved_scalars;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(const char* op, std::vector<NodePtr> inputs, const NodePtr& output,
              std::function<void()> backward, std::size_t saved_scalars = 0) {
    output->producer = this;
    output->requires_grad = true;
    bump(output->data.size() + saved_scalars);
    entries_.push_back(Entry{op, std::move(inputs), output, std::move(backward), saved_scalars});
  }

  std::size_t size() const { return entries_.size(); }
  const Entry& entry(std::size_t i) const { return entries_.at(i); }

  /// Populates grads of every requires_grad leaf reachable from `loss`.
  /// Leaf grads accumulate across calls; intermediate grads are released.
  void backward(const Tensor<T>& loss) {
    const auto& root = loss.node();
    if (root->data.size() != 1) {
      throw GradError("backward: loss must be scalar, got shape " + shape_str(root->shape));
    }
    if (root->producer != this) {
      throw GradError("backward: loss was not produced by an op recorded on this tape");
    }
    ensure_grad(*root);
    root->grad[0] += T(1);
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
      auto& out = *it->output;
      if (out.grad.empty()) continue;  // not an ancestor of the loss
      for (const auto& in : it->inputs) {
        if (in->requires_grad) ensure_grad(*in);
      }
      it->backward();
      release(out.data.size() + out.grad.size() + it->saved_scalars);
      std::vector<T>().swap(out.grad);
    }
  }

  void clear() {
    entries_.clear();
    live_ = 0;
  }

  std::size_t live_scalars() const { return live_; }
  std::size_t peak_live_scalars() const { return peak_; }
  void reset_peak() { peak_ = live_; }

 private:
  void ensure_grad(TensorNode<T>& node) {
    if (node.grad.empty()) {
      node.grad.assign(node.data.size(), T(0));
      bump(node.data.size());
    }
  }
  void bump(std::size_t n) {
    live_ += n;
    if (live_ > peak_) peak_ = live_;
  }
  void release(std::size_t n) { live_ = n > live_ ? 0 : live_ - n; }

  std::vector<Entry> entries_;
  std::size_t live_ = 0;
  std::size_t peak_ = 0;
};

template <typename T>
Tape<T>*& active_tape_slot() {
  thread_local Tape<T>* slot = nullptr;
  return slot;
}

template <typename T>
Tape<T>* active_tape() {
  return active_tape_slot<T>();
}

/// Makes `tape` the active tape for the current thread for the scope's lifetime.
template <typename T>
class TapeScope {
 public:
  explicit TapeScope(Tape<T>& tape) : previous_(active_tape_slot<T>()) {
    active_tape_slot<T>() = &tape;
  }
  ~TapeScope() { active_tape_slot<T>() = previous_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<T>* previous_;
};

/// Disables recording for the current thread for the scope's lifetime.
template <typename T>
class NoGradScope {
 public:
  NoGradScope() : previous_(active_tape_slot<T>()) { active_tape_slot<T>() = nullptr; }
  ~NoGradScope() { active_tape_slot<T>() = previous_; }
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape<T>* previous_;
};

template <typename T>
void backward(const Tensor<T>& loss, Tape<T>& tape) {
  tape.backward(loss);
}

}  // namespace dropclip::numerics
