// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dropclip/synthdata/scene.hpp"
#include "dropclip/synthdata/tokenizer.hpp"

namespace dropclip::synthdata {

inline constexpr std::string_view kManifestHeader = "DROPCLIP-MANIFEST v1";

/// static: single replicated frame with a position caption (stage-0 corpus).
/// motion: moving objects with motion captions (post-pretraining corpus).
enum class CaptionStyle : std::uint8_t { static_scene, motion };

std::string_view name(CaptionStyle style);
CaptionStyle parse_caption_style(std::string_view text);

/// Everything needed to regenerate a split: sample i is a pure function of
/// (seed, i) and the geometry fields.
struct DatasetManifest {
  std::string split = "train";
  std::uint64_t seed = 7;
  std::size_t count = 1024;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t frames = 8;
  CaptionStyle style = CaptionStyle::motion;
  Vocabulary vocabulary = Vocabulary::standard();

  void validate() const;
  bool operator==(const DatasetManifest&) const = default;
};

std::string manifest_to_string(const DatasetManifest& manifest);
DatasetManifest parse_manifest(std::string_view text);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest read_manifest(const std::filesystem::path& path);

/// train / val / test manifests with master seeds seed, seed+1, seed+2.
DatasetManifest split_manifest(const DatasetManifest& base, std::string_view split);

struct Sample {
  VideoClip clip;
  std::string caption;
  SceneSpec scene;
  /// Position phrase direction for static captions; Motion::none otherwise.
  Motion side = Motion::none;
};

/// Number of (shape, color, motion-or-side) cells; indices are stratified
/// over cells in blocks of this size.
std::size_t cell_count(CaptionStyle style);

Sample gen_sample(const DatasetManifest& manifest, std::size_t index);

std::string motion_caption(ShapeKind shape, Color color, Motion motion);
std::string static_caption(ShapeKind shape, Color color, Motion side);

/// Writes "<index>\t<caption>" per sample.
void dump_captions(const DatasetManifest& manifest, const std::filesystem::path& path);

}  // namespace dropclip::synthdata
