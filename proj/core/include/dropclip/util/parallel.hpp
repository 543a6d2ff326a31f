// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dropclip::util {

/// Worker count for read-only evaluation passes (default 1). Training never
/// uses it.
std::size_t worker_threads();
void set_worker_threads(std::size_t n);

/// Runs fn(i) for i in [0, n). Work item i always produces the same result
/// regardless of thread count, so callers that write into slot i stay
/// deterministic. The first exception thrown is rethrown here.
template <typename F>
void parallel_for(std::size_t n, F&& fn) {
  const std::size_t threads = std::min(worker_threads(), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += threads) fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace dropclip::util
