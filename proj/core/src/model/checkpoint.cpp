// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "dropclip/model/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "dropclip/model/model.hpp"
#include "dropclip/util/kv_file.hpp"
#include "dropclip/util/rng.hpp"

namespace dropclip::model {

namespace {

template <typename U>
void put_le(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float value) { put_le(out, std::bit_cast<std::uint32_t>(value)); }

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename U>
  U le(const char* what) {
    need(sizeof(U), what);
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      value |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(U);
    return value;
  }

  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw util::FormatError(std::string("checkpoint truncated while reading ") + what +
                              " at byte " + std::to_string(pos_));
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const ParamTree<float>& params) {
  std::string out(kCheckpointHeader);
  out.push_back('\n');
  put_le<std::uint64_t>(out, params.size());
  for (const auto& [name, e] : params.entries()) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    out.push_back(e.trainable ? '\1' : '\0');
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.value.rank()));
    for (auto d : e.value.shape()) put_le<std::uint64_t>(out, d);
    for (float v : e.value.data()) put_f32(out, v);
  }
  return out;
}

ParamTree<float> decode_checkpoint(std::string_view bytes) {
  const auto nl = bytes.find('\n');
  const auto header = bytes.substr(0, nl == std::string_view::npos ? 0 : nl);
  if (nl == std::string_view::npos || header != kCheckpointHeader) {
    throw util::VersionError("checkpoint: expected header '" + std::string(kCheckpointHeader) + "'");
  }
  Reader in(bytes.substr(nl + 1));
  const auto count = in.le<std::uint64_t>("entry count");
  ParamTree<float> params;
  std::string previous;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = in.le<std::uint32_t>("name length");
    std::string name(in.take(len, "name"));
    if (i > 0 && !(previous < name)) {
      throw util::FormatError("checkpoint: entry '" + name + "' out of lexicographic order");
    }
    const auto flag = in.take(1, "trainable flag")[0];
    const auto rank = in.le<std::uint32_t>("rank");
    if (rank > 8) throw util::FormatError("checkpoint: entry '" + name + "' has implausible rank");
    numerics::Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(in.le<std::uint64_t>("dimension"));
    std::vector<float> data(numerics::shape_size(shape));
    for (auto& v : data) v = std::bit_cast<float>(in.le<std::uint32_t>("payload"));
    params.add(name, numerics::Tensor<float>(std::move(shape), std::move(data)), flag != '\0');
    previous = std::move(name);
  }
  if (!in.done()) throw util::FormatError("checkpoint: trailing bytes after last entry");
  return params;
}

void save_checkpoint(const ParamTree<float>& params, const std::filesystem::path& path) {
  util::write_text_file(path, encode_checkpoint(params));
}

ParamTree<float> load_checkpoint(const std::filesystem::path& path) {
  try {
    return decode_checkpoint(util::read_text_file(path));
  } catch (const util::VersionError& e) {
    throw util::VersionError(path.string() + ": " + e.what());
  } catch (const util::FormatError& e) {
    throw util::FormatError(path.string() + ": " + e.what());
  }
}

void validate_against(const ParamTree<float>& params, const ModelConfig& config) {
  const auto expected = init_params<float>(config, 0);
  params.check_same_structure(expected);
}

ParamTree<float> load_checkpoint(const std::filesystem::path& path, const ModelConfig& config) {
  auto params = load_checkpoint(path);
  validate_against(params, config);
  return params;
}

std::uint64_t payload_hash(const numerics::Tensor<float>& value) {
  std::string bytes;
  bytes.reserve(value.size() * 4);
  for (float v : value.data()) put_f32(bytes, v);
  return util::fnv1a(bytes);
}

std::uint64_t tree_hash(const ParamTree<float>& params) {
  return util::fnv1a(encode_checkpoint(params));
}

}  // namespace dropclip::model
