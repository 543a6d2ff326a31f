// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "dropclip/util/kv_file.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace dropclip::util {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

void KvDocument::set(std::string key, std::string value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  entries_.emplace_back(std::move(key), std::move(value));
}

const std::string* KvDocument::find(std::string_view key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return &v;
  }
  return nullptr;
}

const std::string& KvDocument::require(std::string_view key) const {
  if (const auto* v = find(key)) return *v;
  throw MissingKeyError(std::string(key));
}

std::string KvDocument::to_string() const {
  std::string out = header_ + "\n";
  for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
  return out;
}

KvDocument parse_kv(std::string_view text, std::string_view expected_header) {
  KvDocument doc;
  std::size_t line_no = 0;
  bool have_header = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto line = trim(raw);
    if (!have_header) {
      if (line != expected_header) {
        throw VersionError("expected header '" + std::string(expected_header) + "', found '" +
                           std::string(line) + "'");
      }
      doc = KvDocument(std::string(line));
      have_header = true;
      continue;
    }
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos || eq == 0) {
      throw FormatError("line " + std::to_string(line_no) + ": malformed entry '" +
                        std::string(line) + "' (expected key=value)");
    }
    const auto key = std::string(trim(line.substr(0, eq)));
    if (doc.contains(key)) {
      throw FormatError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    doc.set(key, std::string(trim(line.substr(eq + 1))));
  }
  if (!have_header) {
    throw VersionError("expected header '" + std::string(expected_header) + "', found empty input");
  }
  return doc;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

KvDocument read_kv_file(const std::filesystem::path& path, std::string_view expected_header) {
  try {
    return parse_kv(read_text_file(path), expected_header);
  } catch (const VersionError& e) {
    throw VersionError(path.string() + ": " + e.what());
  } catch (const MissingKeyError&) {
    throw;
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

long long parse_int(std::string_view key, const std::string& value) {
  long long out = 0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw FormatError("key '" + std::string(key) + "': expected integer, got '" + value + "'");
  }
  return out;
}

double parse_double(std::string_view key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const double out = std::strtod(value.c_str(), &end);
  if (value.empty() || end != value.c_str() + value.size() || errno == ERANGE) {
    throw FormatError("key '" + std::string(key) + "': expected number, got '" + value + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw FormatError("key '" + std::string(key) + "': expected true/false, got '" + value + "'");
}

std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  // Prefer the shortest representation that round-trips.
  for (int prec = 1; prec <= 17; ++prec) {
    char shorter[64];
    std::snprintf(shorter, sizeof(shorter), "%.*g", prec, value);
    if (std::strtod(shorter, nullptr) == value) return shorter;
  }
  return buf;
}

}  // namespace dropclip::util
