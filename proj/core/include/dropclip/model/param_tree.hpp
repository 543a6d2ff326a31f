// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstring>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dropclip/numerics/tensor.hpp"

namespace dropclip::model {

class StructureError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Named parameters in lexicographic order, each with a trainable flag.
/// Entries flagged frozen never receive optimizer updates.
template <typename T>
class ParamTree {
 public:
  struct Entry {
    numerics::Tensor<T> value;
    bool trainable = true;
  };
  using Map = std::map<std::string, Entry, std::less<>>;

  void add(std::string name, numerics::Tensor<T> value, bool trainable = true) {
    if (entries_.contains(name)) throw StructureError("param tree: duplicate entry '" + name + "'");
    entries_.emplace(std::move(name), Entry{std::move(value), trainable});
  }

  bool contains(std::string_view name) const { return entries_.find(name) != entries_.end(); }

  const numerics::Tensor<T>& at(std::string_view name) const { return lookup(name).value; }
  numerics::Tensor<T>& at(std::string_view name) { return lookup(name).value; }
  const numerics::Tensor<T>& operator[](std::string_view name) const { return at(name); }

  bool trainable(std::string_view name) const { return lookup(name).trainable; }
  void set_trainable(std::string_view name, bool value) { lookup(name).trainable = value; }

  /// Sets the flag on every entry whose name starts with `prefix`; returns the count.
  std::size_t set_trainable_prefix(std::string_view prefix, bool value) {
    std::size_t n = 0;
    for (auto& [name, e] : entries_) {
      if (std::string_view(name).substr(0, prefix.size()) == prefix) {
        e.trainable = value;
        ++n;
      }
    }
    return n;
  }

  void erase(std::string_view name) {
    auto it = entries_.find(name);
    if (it != entries_.end()) entries_.erase(it);
  }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const Map& entries() const { return entries_; }
  Map& entries() { return entries_; }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, e] : entries_) n += e.value.size();
    return n;
  }

  /// Deep copy with detached storage.
  ParamTree clone() const {
    ParamTree out;
    for (const auto& [name, e] : entries_) out.entries_.emplace(name, Entry{e.value.clone(), e.trainable});
    return out;
  }

  template <typename U>
  ParamTree<U> cast() const {
    ParamTree<U> out;
    for (const auto& [name, e] : entries_) {
      const auto src = e.value.data();
      std::vector<U> data(src.begin(), src.end());
      out.add(name, numerics::Tensor<U>(e.value.shape(), std::move(data)), e.trainable);
    }
    return out;
  }

  /// Marks trainable entries as requiring grad and frozen ones as not.
  void prepare_grads() {
    for (auto& [_, e] : entries_) {
      e.value.zero_grad();
      e.value.set_requires_grad(e.trainable);
    }
  }

  void zero_grads() {
    for (auto& [_, e] : entries_) e.value.zero_grad();
  }

  /// Throws StructureError naming the first differing entry.
  void check_same_structure(const ParamTree& other) const {
    auto a = entries_.begin();
    auto b = other.entries_.begin();
    for (; a != entries_.end() && b != other.entries_.end(); ++a, ++b) {
      if (a->first != b->first) {
        throw StructureError("param tree mismatch at '" + std::min(a->first, b->first) + "'");
      }
      if (a->second.value.shape() != b->second.value.shape()) {
        throw StructureError("param tree mismatch at '" + a->first + "': shape " +
                             numerics::shape_str(a->second.value.shape()) + " vs " +
                             numerics::shape_str(b->second.value.shape()));
      }
    }
    if (a != entries_.end()) throw StructureError("param tree mismatch at '" + a->first + "'");
    if (b != other.entries_.end()) throw StructureError("param tree mismatch at '" + b->first + "'");
  }

  /// Bitwise equality of names, flags, shapes and values.
  bool identical(const ParamTree& other) const {
    if (entries_.size() != other.entries_.size()) return false;
    auto b = other.entries_.begin();
    for (const auto& [name, e] : entries_) {
      if (name != b->first || e.trainable != b->second.trainable ||
          e.value.shape() != b->second.value.shape())
        return false;
      const auto x = e.value.data();
      const auto y = b->second.value.data();
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (!bit_equal(x[i], y[i])) return false;
      }
      ++b;
    }
    return true;
  }

 private:
  static bool bit_equal(T a, T b) {
    return std::memcmp(&a, &b, sizeof(T)) == 0;
  }

  Entry& lookup(std::string_view name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw StructureError("param tree: no entry '" + std::string(name) + "'");
    return it->second;
  }
  const Entry& lookup(std::string_view name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw StructureError("param tree: no entry '" + std::string(name) + "'");
    return it->second;
  }

  Map entries_;
};

}  // namespace dropclip::model
