// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#include "dropclip/synthdata/scene.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

namespace dropclip::synthdata {

std::string_view name(ShapeKind shape) {
  switch (shape) {
    case ShapeKind::square: return "square";
    case ShapeKind::circle: return "circle";
    case ShapeKind::triangle: return "triangle";
  }
  return "?";
}

std::string_view name(Color color) {
  switch (color) {
    case Color::red: return "red";
    case Color::green: return "green";
    case Color::blue: return "blue";
    case Color::yellow: return "yellow";
  }
  return "?";
}

std::string_view name(Motion motion) {
  switch (motion) {
    case Motion::left: return "left";
    case Motion::right: return "right";
    case Motion::up: return "up";
    case Motion::down: return "down";
    case Motion::none: return "none";
  }
  return "?";
}

std::array<float, 3> rgb(Color color) {
  switch (color) {
    case Color::red: return {1.0f, 0.0f, 0.0f};
    case Color::green: return {0.0f, 1.0f, 0.0f};
    case Color::blue: return {0.0f, 0.0f, 1.0f};
    case Color::yellow: return {1.0f, 1.0f, 0.0f};
  }
  return {0.0f, 0.0f, 0.0f};
}

std::array<int, 2> direction_vector(Motion motion) {
  switch (motion) {
    case Motion::left: return {-1, 0};
    case Motion::right: return {1, 0};
    case Motion::up: return {0, -1};
    case Motion::down: return {0, 1};
    case Motion::none: return {0, 0};
  }
  return {0, 0};
}

int default_object_size(std::size_t height) {
  return std::max(3, static_cast<int>(height) * 5 / 16);
}

bool trajectory_feasible(const SceneSpec& spec, std::size_t frames, std::size_t height,
                         std::size_t width) {
  if (spec.size < 1 || spec.speed < 0 || frames == 0) return false;
  const auto [dx, dy] = direction_vector(spec.motion);
  const long span = static_cast<long>(spec.speed) * static_cast<long>(frames - 1);
  const long x_end = spec.x + dx * span;
  const long y_end = spec.y + dy * span;
  const long w = static_cast<long>(width), h = static_cast<long>(height), s = spec.size;
  return std::min<long>(spec.x, x_end) >= 0 && std::max<long>(spec.x, x_end) + s <= w &&
         std::min<long>(spec.y, y_end) >= 0 && std::max<long>(spec.y, y_end) + s <= h;
}

namespace {

bool covers(ShapeKind shape, int u, int v, int s) {
  switch (shape) {
    case ShapeKind::square:
      return true;
    case ShapeKind::circle: {
      const int cu = 2 * u + 1 - s, cv = 2 * v + 1 - s;
      return cu * cu + cv * cv <= s * s;
    }
    case ShapeKind::triangle:
      // Apex at the top row, base spanning the bottom row.
      return std::abs(2 * u + 1 - s) <= v + 1;
  }
  return false;
}

}  // namespace

VideoClip render(const SceneSpec& spec, std::size_t frames, std::size_t height, std::size_t width) {
  if (!trajectory_feasible(spec, frames, height, width)) {
    throw InfeasibleSceneError("scene leaves the " + std::to_string(width) + "x" +
                               std::to_string(height) + " frame within " + std::to_string(frames) +
                               " frames");
  }
  VideoClip clip;
  clip.frames = frames;
  clip.height = height;
  clip.width = width;
  clip.pixels.assign(frames * height * width * VideoClip::kChannels, 0.0f);
  const auto color = rgb(spec.color);
  const auto [dx, dy] = direction_vector(spec.motion);
  for (std::size_t t = 0; t < frames; ++t) {
    const int ox = spec.x + dx * spec.speed * static_cast<int>(t);
    const int oy = spec.y + dy * spec.speed * static_cast<int>(t);
    for (int v = 0; v < spec.size; ++v) {
      for (int u = 0; u < spec.size; ++u) {
        if (!covers(spec.shape, u, v, spec.size)) continue;
        for (std::size_t c = 0; c < VideoClip::kChannels; ++c)
          clip.at(t, static_cast<std::size_t>(oy + v), static_cast<std::size_t>(ox + u), c) = color[c];
      }
    }
  }
  return clip;
}

std::array<double, 2> centroid(const VideoClip& clip, std::size_t frame) {
  double sx = 0.0, sy = 0.0;
  std::size_t n = 0;
  for (std::size_t y = 0; y < clip.height; ++y) {
    for (std::size_t x = 0; x < clip.width; ++x) {
      bool lit = false;
      for (std::size_t c = 0; c < VideoClip::kChannels; ++c) lit = lit || clip.at(frame, y, x, c) > 0.0f;
      if (!lit) continue;
      sx += static_cast<double>(x);
      sy += static_cast<double>(y);
      ++n;
    }
  }
  if (n == 0) return {0.0, 0.0};
  return {sx / static_cast<double>(n), sy / static_cast<double>(n)};
}

}  // namespace dropclip::synthdata
