// Copyright 2026 The dropclip Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace dropclip::synthdata {

enum class ShapeKind : std::uint8_t { square, circle, triangle };
enum class Color : std::uint8_t { red, green, blue, yellow };
enum class Motion : std::uint8_t { left, right, up, down, none };

inline constexpr std::array<ShapeKind, 3> kAllShapes = {ShapeKind::square, ShapeKind::circle,
                                                        ShapeKind::triangle};
inline constexpr std::array<Color, 4> kAllColors = {Color::red, Color::green, Color::blue,
                                                    Color::yellow};
inline constexpr std::array<Motion, 5> kAllMotions = {Motion::left, Motion::right, Motion::up,
                                                      Motion::down, Motion::none};
inline constexpr std::array<Motion, 4> kDirections = {Motion::left, Motion::right, Motion::up,
                                                      Motion::down};

std::string_view name(ShapeKind shape);
std::string_view name(Color color);
/// "left", "right", "up", "down"; Motion::none maps to "none".
std::string_view name(Motion motion);

class InfeasibleSceneError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// One object on a black background. (x, y) is the top-left corner of the
/// object's size x size bounding box at frame 0; it moves `speed` pixels per
/// frame in the motion direction.
struct SceneSpec {
  ShapeKind shape = ShapeKind::square;
  Color color = Color::red;
  Motion motion = Motion::none;
  int x = 0;
  int y = 0;
  int speed = 0;
  int size = 10;

  bool operator==(const SceneSpec&) const = default;
};

/// frames x height x width x 3 pixels in [0, 1], row-major.
struct VideoClip {
  static constexpr std::size_t kChannels = 3;

  std::size_t frames = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> pixels;

  float at(std::size_t t, std::size_t y, std::size_t x, std::size_t c) const {
    return pixels[((t * height + y) * width + x) * kChannels + c];
  }
  float& at(std::size_t t, std::size_t y, std::size_t x, std::size_t c) {
    return pixels[((t * height + y) * width + x) * kChannels + c];
  }

  bool operator==(const VideoClip&) const = default;
};

std::array<float, 3> rgb(Color color);

/// Per-frame displacement direction (dx, dy) of a motion.
std::array<int, 2> direction_vector(Motion motion);

bool trajectory_feasible(const SceneSpec& spec, std::size_t frames, std::size_t height,
                         std::size_t width);

/// Hard-edged rasterisation. Throws InfeasibleSceneError if the object leaves
/// the frame at any time step.
VideoClip render(const SceneSpec& spec, std::size_t frames, std::size_t height, std::size_t width);

/// Mean (x, y) of non-background pixel centres in one frame.
std::array<double, 2> centroid(const VideoClip& clip, std::size_t frame);

/// Default object size for a frame of the given height.
int default_object_size(std::size_t height);

}  // namespace dropclip::synthdata
