// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "dropclip/util/parallel.hpp"

#include <atomic>
#include <stdexcept>

namespace dropclip::util {

namespace {
std::atomic<std::size_t> g_threads{1};
}

std::size_t worker_threads() { return g_threads.load(); }

void set_worker_threads(std::size_t n) {
  if (n == 0) throw std::invalid_argument("thread count must be at least 1");
  g_threads.store(n);
}

}  // namespace dropclip::util
