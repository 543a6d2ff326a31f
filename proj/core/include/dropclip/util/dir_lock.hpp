// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <stdexcept>

namespace dropclip::util {

class LockedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Exclusive claim on an output directory via a ".lock" file created with
/// O_EXCL semantics. Released on destruction. A stale lock left by a crashed
/// process must be removed by hand.
class DirLock {
 public:
  explicit DirLock(const std::filesystem::path& dir);
  ~DirLock();
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  std::filesystem::path path_;
};

}  // namespace dropclip::util
