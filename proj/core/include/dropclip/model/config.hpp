// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "dropclip/util/kv_file.hpp"

namespace dropclip::model {

inline constexpr std::string_view kModelConfigHeader = "DROPCLIP-MODEL v1";

/// temporal: frame-wise encoder plus a zero-initialised cross-frame block.
/// frame_avg: frame-wise encoder, per-frame class features averaged.
enum class Backbone : std::uint8_t { temporal, frame_avg };

std::string_view name(Backbone backbone);
Backbone parse_backbone(std::string_view text);

struct ModelConfig {
  std::size_t embed_dim = 64;
  std::size_t vision_layers = 2;
  std::size_t vision_heads = 4;
  std::size_t text_layers = 2;
  std::size_t text_heads = 4;
  bool with_decoder = true;
  std::size_t decoder_layers = 4;
  std::size_t decoder_dim = 32;
  std::size_t decoder_heads = 2;
  std::size_t mlp_ratio = 4;
  std::size_t patch_size = 8;
  std::size_t frames = 8;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t channels = 3;
  std::size_t vocab_size = 28;
  std::size_t max_text_len = 12;
  std::size_t proj_dim = 64;
  Backbone backbone = Backbone::temporal;

  std::size_t patches_per_frame() const { return (height / patch_size) * (width / patch_size); }
  std::size_t num_patches() const { return frames * patches_per_frame(); }
  std::size_t patch_dim() const { return patch_size * patch_size * channels; }
  bool has_temporal_block() const { return backbone == Backbone::temporal; }

  /// Throws std::invalid_argument describing the first violated constraint.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

/// Writes/reads every field with the given key prefix (e.g. "model.").
void store(const ModelConfig& config, util::KvDocument& doc, std::string_view prefix = "");
ModelConfig load_model_config(const util::KvDocument& doc, std::string_view prefix = "",
                              ModelConfig defaults = {});

void write_model_config(const ModelConfig& config, const std::filesystem::path& path);
ModelConfig read_model_config(const std::filesystem::path& path);

}  // namespace dropclip::model
