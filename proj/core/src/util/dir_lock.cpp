// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "dropclip/util/dir_lock.hpp"

#include <cstdio>
#include <system_error>

namespace dropclip::util {

DirLock::DirLock(const std::filesystem::path& dir) : path_(dir / ".lock") {
  std::filesystem::create_directories(dir);
  std::FILE* f = std::fopen(path_.c_str(), "wx");
  if (f == nullptr) {
    throw LockedError("output directory " + dir.string() + " is locked by another run (" +
                      path_.string() + " exists)");
  }
  std::fclose(f);
}

DirLock::~DirLock() {
  std::error_code ec;
  std::filesystem::remove(path_, ec);
}

}  // namespace dropclip::util
