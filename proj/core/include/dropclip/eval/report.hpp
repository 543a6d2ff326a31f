// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace dropclip::eval {

/// Rows of named columns, rendered either as an aligned plain-text table or
/// as line-delimited `column=value` records.
class Table {
 public:
  explicit Table(std::vector<std::string> columns);

  void add_row(std::vector<std::string> cells);

  const std::vector<std::string>& columns() const { return columns_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }

  std::string text() const;
  std::string records() const;

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

/// Fixed-precision rendering used in every report (byte-stable across runs).
std::string fixed(double value, int decimals = 4);

}  // namespace dropclip::eval
