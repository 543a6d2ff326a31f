// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "dropclip/synthdata/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "dropclip/util/kv_file.hpp"
#include "dropclip/util/rng.hpp"

namespace dropclip::synthdata {

std::string_view name(CaptionStyle style) {
  return style == CaptionStyle::motion ? "motion" : "static";
}

CaptionStyle parse_caption_style(std::string_view text) {
  if (text == "motion") return CaptionStyle::motion;
  if (text == "static") return CaptionStyle::static_scene;
  throw util::FormatError("unknown caption style '" + std::string(text) + "'");
}

void DatasetManifest::validate() const {
  if (split.empty()) throw std::invalid_argument("manifest: empty split name");
  if (count == 0) throw std::invalid_argument("manifest: count must be positive");
  if (frames == 0) throw std::invalid_argument("manifest: frames must be positive");
  if (static_cast<int>(std::min(height, width)) < default_object_size(height) + 2) {
    throw std::invalid_argument("manifest: resolution too small for the rendered objects");
  }
  // Every template word must be representable.
  for (auto shape : kAllShapes) {
    for (auto color : kAllColors) {
      for (auto motion : kAllMotions) {
        for (const auto& text : {motion_caption(shape, color, motion),
                                 motion == Motion::none ? std::string("a")
                                                        : static_caption(shape, color, motion)}) {
          std::size_t pos = 0;
          while (pos < text.size()) {
            auto end = text.find(' ', pos);
            if (end == std::string::npos) end = text.size();
            const auto word = text.substr(pos, end - pos);
            if (!vocabulary.contains(word)) {
              throw std::invalid_argument("manifest: vocabulary lacks template word '" + word + "'");
            }
            pos = end + 1;
          }
        }
      }
    }
  }
}

std::string manifest_to_string(const DatasetManifest& m) {
  util::KvDocument doc{std::string(kManifestHeader)};
  doc.set("split", m.split);
  doc.set("seed", std::to_string(m.seed));
  doc.set("count", std::to_string(m.count));
  doc.set("resolution", std::to_string(m.height) + "x" + std::to_string(m.width));
  doc.set("frames", std::to_string(m.frames));
  doc.set("caption_style", std::string(name(m.style)));
  doc.set("vocabulary", m.vocabulary.listing());
  return doc.to_string();
}

DatasetManifest parse_manifest(std::string_view text) {
  const auto doc = util::parse_kv(text, kManifestHeader);
  DatasetManifest m;
  m.split = doc.require("split");
  const auto seed = util::parse_int("seed", doc.require("seed"));
  if (seed < 0) throw util::FormatError("key 'seed': must be non-negative");
  m.seed = static_cast<std::uint64_t>(seed);
  const auto count = util::parse_int("count", doc.require("count"));
  if (count <= 0) throw util::FormatError("key 'count': must be positive");
  m.count = static_cast<std::size_t>(count);
  const auto& res = doc.require("resolution");
  const auto x = res.find('x');
  if (x == std::string::npos) throw util::FormatError("key 'resolution': expected HxW, got '" + res + "'");
  m.height = static_cast<std::size_t>(util::parse_int("resolution", res.substr(0, x)));
  m.width = static_cast<std::size_t>(util::parse_int("resolution", res.substr(x + 1)));
  const auto frames = util::parse_int("frames", doc.require("frames"));
  if (frames <= 0) throw util::FormatError("key 'frames': must be positive");
  m.frames = static_cast<std::size_t>(frames);
  m.style = parse_caption_style(doc.require("caption_style"));
  m.vocabulary = Vocabulary::from_listing(doc.require("vocabulary"));
  for (const auto& [key, value] : doc.entries()) {
    static const char* known[] = {"split", "seed", "count", "resolution", "frames", "caption_style", "vocabulary"};
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
      throw util::FormatError("unknown manifest key '" + key + "'");
    }
  }
  return m;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  util::write_text_file(path, manifest_to_string(manifest));
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  return parse_manifest(util::read_text_file(path));
}

DatasetManifest split_manifest(const DatasetManifest& base, std::string_view split) {
  DatasetManifest m = base;
  m.split = std::string(split);
  if (split == "train") {
    m.seed = base.seed;
  } else if (split == "val") {
    m.seed = base.seed + 1;
  } else if (split == "test") {
    m.seed = base.seed + 2;
  } else {
    throw std::invalid_argument("unknown split '" + std::string(split) + "'");
  }
  return m;
}

std::size_t cell_count(CaptionStyle style) {
  return kAllShapes.size() * kAllColors.size() *
         (style == CaptionStyle::motion ? kAllMotions.size() : kDirections.size());
}

std::string motion_caption(ShapeKind shape, Color color, Motion motion) {
  std::string out = "a " + std::string(name(color)) + " " + std::string(name(shape));
  if (motion == Motion::none) return out + " not moving";
  return out + " moving " + std::string(name(motion));
}

std::string static_caption(ShapeKind shape, Color color, Motion side) {
  if (side == Motion::none) throw std::invalid_argument("static caption needs a side");
  return "a " + std::string(name(color)) + " " + std::string(name(shape)) + " not moving on the " +
         std::string(name(side)) + " side";
}

namespace {

int uniform_int(util::Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(rng.below(static_cast<std::size_t>(hi - lo + 1)));
}

std::size_t stratified_cell(const DatasetManifest& m, std::size_t index) {
  const std::size_t cells = cell_count(m.style);
  const std::size_t block = index / cells;
  util::Rng rng(util::mix_seed(util::mix_seed(m.seed, util::fnv1a("cells")), block));
  std::vector<std::size_t> perm(cells);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = cells - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  return perm[index % cells];
}

// Position the object so its centre lies in the band named by `side`.
void place_static(SceneSpec& s, Motion side, int h, int w, util::Rng& rng) {
  const int reach_x = std::max(0, w / 3 - s.size / 2);
  const int reach_y = std::max(0, h / 3 - s.size / 2);
  const int mid_x = (w - s.size) / 2, mid_y = (h - s.size) / 2;
  const int jitter_x = std::min(w / 8, mid_x), jitter_y = std::min(h / 8, mid_y);
  switch (side) {
    case Motion::left:
      s.x = uniform_int(rng, 0, reach_x);
      s.y = uniform_int(rng, mid_y - jitter_y, mid_y + jitter_y);
      break;
    case Motion::right:
      s.x = uniform_int(rng, w - s.size - reach_x, w - s.size);
      s.y = uniform_int(rng, mid_y - jitter_y, mid_y + jitter_y);
      break;
    case Motion::up:
      s.x = uniform_int(rng, mid_x - jitter_x, mid_x + jitter_x);
      s.y = uniform_int(rng, 0, reach_y);
      break;
    case Motion::down:
      s.x = uniform_int(rng, mid_x - jitter_x, mid_x + jitter_x);
      s.y = uniform_int(rng, h - s.size - reach_y, h - s.size);
      break;
    case Motion::none:
      break;
  }
}

// Start coordinate range along one axis for a trajectory of `span` pixels.
bool start_range(int extent, int size, int step, int span, int& lo, int& hi) {
  lo = step < 0 ? span : 0;
  hi = extent - size - (step > 0 ? span : 0);
  return lo <= hi;
}

}  // namespace

Sample gen_sample(const DatasetManifest& m, std::size_t index) {
  if (index >= m.count) {
    throw std::out_of_range("gen_sample: index " + std::to_string(index) + " out of range for " +
                            std::to_string(m.count) + " samples");
  }
  const std::size_t cell = stratified_cell(m, index);
  const std::size_t per_shape = cell_count(m.style) / kAllShapes.size();
  const std::size_t last = m.style == CaptionStyle::motion ? kAllMotions.size() : kDirections.size();

  Sample out;
  SceneSpec& s = out.scene;
  s.shape = kAllShapes[cell / per_shape];
  s.color = kAllColors[(cell / last) % kAllColors.size()];
  s.size = default_object_size(m.height);
  const int h = static_cast<int>(m.height), w = static_cast<int>(m.width);

  util::Rng rng(util::mix_seed(util::mix_seed(m.seed, util::fnv1a("sample")), index));
  if (m.style == CaptionStyle::static_scene) {
    out.side = kDirections[cell % last];
    s.motion = Motion::none;
    s.speed = 0;
    place_static(s, out.side, h, w, rng);
    out.caption = static_caption(s.shape, s.color, out.side);
  } else {
    s.motion = kAllMotions[cell % last];
    if (s.motion == Motion::none) {
      s.speed = 0;
      s.x = uniform_int(rng, 0, w - s.size);
      s.y = uniform_int(rng, 0, h - s.size);
    } else {
      const auto [dx, dy] = direction_vector(s.motion);
      // Draw a speed; infeasible draws fall back to slower speeds.
      int speed = 2 + static_cast<int>(rng.below(2));
      for (;; --speed) {
        if (speed < 1) {
          throw InfeasibleSceneError("gen_sample: no feasible trajectory for " +
                                     std::to_string(m.frames) + " frames at " +
                                     std::to_string(w) + "x" + std::to_string(h));
        }
        const int span = speed * static_cast<int>(m.frames - 1);
        int xlo, xhi, ylo, yhi;
        if (start_range(w, s.size, dx, span * std::abs(dx), xlo, xhi) &&
            start_range(h, s.size, dy, span * std::abs(dy), ylo, yhi)) {
          s.speed = speed;
          s.x = uniform_int(rng, xlo, xhi);
          s.y = uniform_int(rng, ylo, yhi);
          break;
        }
      }
    }
    out.caption = motion_caption(s.shape, s.color, s.motion);
  }
  out.clip = render(s, m.frames, m.height, m.width);
  return out;
}

void dump_captions(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  for (std::size_t i = 0; i < manifest.count; ++i) {
    out << i << '\t' << gen_sample(manifest, i).caption << '\n';
  }
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

}  // namespace dropclip::synthdata
