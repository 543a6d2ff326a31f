// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dropclip::util {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class MissingKeyError : public FormatError {
 public:
  MissingKeyError(const std::string& key)
      : FormatError("missing required key '" + key + "'"), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Plain-text `key=value` document with a versioned first line. Blank lines
/// and lines starting with '#' are ignored.
class KvDocument {
 public:
  KvDocument() = default;
  explicit KvDocument(std::string header) : header_(std::move(header)) {}

  const std::string& header() const { return header_; }
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  void set(std::string key, std::string value);
  const std::string* find(std::string_view key) const;
  const std::string& require(std::string_view key) const;
  bool contains(std::string_view key) const { return find(key) != nullptr; }

  std::string to_string() const;

 private:
  std::string header_;
  std::vector<std::pair<std::string, std::string>> entries_;
};

KvDocument parse_kv(std::string_view text, std::string_view expected_header);
KvDocument read_kv_file(const std::filesystem::path& path, std::string_view expected_header);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

// Typed value parsing with the offending key in error messages.
long long parse_int(std::string_view key, const std::string& value);
double parse_double(std::string_view key, const std::string& value);
bool parse_bool(std::string_view key, const std::string& value);
std::string format_double(double value);

}  // namespace dropclip::util
