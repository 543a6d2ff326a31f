// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "dropclip/model/config.hpp"
#include "dropclip/model/param_tree.hpp"

namespace dropclip::model {

inline constexpr std::string_view kCheckpointHeader = "DROPCLIP-CKPT v1";

// Layout, all integers little-endian:
//   "DROPCLIP-CKPT v1\n"
//   u64 entry count
//   per entry, in lexicographic name order:
//     u32 name length, name bytes, u8 trainable, u32 rank, u64 dims[rank],
//     f32 payload[product(dims)]
std::string encode_checkpoint(const ParamTree<float>& params);
ParamTree<float> decode_checkpoint(std::string_view bytes);

void save_checkpoint(const ParamTree<float>& params, const std::filesystem::path& path);
ParamTree<float> load_checkpoint(const std::filesystem::path& path);
/// Also checks every name and shape against a freshly initialised tree for `config`.
ParamTree<float> load_checkpoint(const std::filesystem::path& path, const ModelConfig& config);

/// Throws StructureError on the first name/shape difference from `config`'s layout.
void validate_against(const ParamTree<float>& params, const ModelConfig& config);

/// FNV-1a over the little-endian payload bytes of one tensor.
std::uint64_t payload_hash(const numerics::Tensor<float>& value);
/// FNV-1a over the full encoded checkpoint.
std::uint64_t tree_hash(const ParamTree<float>& params);

}  // namespace dropclip::model
