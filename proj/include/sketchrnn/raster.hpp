// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "sketch.hpp"

namespace sketchrnn {

/// G x G binary occupancy grid, row-major (index y * G + x).
class RasterImage {
public:
  RasterImage() = default;
  explicit RasterImage(int side)
      : side_(side), bits_(static_cast<std::size_t>(side) * side, 0) {}

  int side() const noexcept { return side_; }

  bool at(int x, int y) const noexcept {
    return bits_[static_cast<std::size_t>(y) * side_ + x] != 0;
  }
  void set(int x, int y) noexcept {
    bits_[static_cast<std::size_t>(y) * side_ + x] = 1;
  }

  std::size_t count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
  }

  /// Every on-pixel of *this is also on in `other`.
  bool subset_of(const RasterImage &other) const noexcept {
    if (other.side_ != side_)
      return false;
    for (std::size_t i = 0; i < bits_.size(); ++i)
      if (bits_[i] && !other.bits_[i])
        return false;
    return true;
  }

  const std::vector<std::uint8_t> &bits() const noexcept { return bits_; }

  friend bool operator==(const RasterImage &, const RasterImage &) = default;

private:
  int side_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Pixel index of a normalized coordinate; out-of-range values are clamped
/// to the canvas edge.
inline int pixel_coord(double v, int side) {
  const double clamped = std::clamp(v, 0.0, 1.0);
  const int p = static_cast<int>(std::floor(clamped * (side - 1) + 0.5));
  return std::clamp(p, 0, side - 1);
}

/// Integer Bresenham line, both endpoints inclusive.
inline void draw_line(RasterImage &img, int x0, int y0, int x1, int y1) {
  const int dx = std::abs(x1 - x0);
  const int dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1;
  const int sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    img.set(x0, y0);
    if (x0 == x1 && y0 == y1)
      break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

/// Inks one stroke on top of whatever is already drawn. A single-point
/// stroke sets one pixel.
inline void draw_stroke(RasterImage &img, const Stroke &stroke) {
  const int g = img.side();
  const auto &pts = stroke.points;
  if (pts.empty())
    return;
  int px = pixel_coord(pts[0].x, g);
  int py = pixel_coord(pts[0].y, g);
  img.set(px, py);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const int qx = pixel_coord(pts[i].x, g);
    const int qy = pixel_coord(pts[i].y, g);
    draw_line(img, px, py, qx, qy);
    px = qx;
    py = qy;
  }
}

/// Image i holds strokes 1..i.
inline std::vector<RasterImage> rasterize_cumulative(const Sketch &sketch,
                                                     int side) {
  if (side < 4)
    throw InvalidConfig("rasterize_cumulative: side must be >= 4, got " +
                        std::to_string(side));
  if (sketch.strokes.empty())
    throw InvalidInput("rasterize_cumulative: sketch '" + sketch.id +
                       "' has no strokes");
  std::vector<RasterImage> out;
  out.reserve(sketch.strokes.size());
  RasterImage canvas(side);
  for (const auto &stroke : sketch.strokes) {
    if (stroke.points.empty())
      throw InvalidInput("rasterize_cumulative: empty stroke in '" +
                         sketch.id + "'");
    draw_stroke(canvas, stroke);
    out.push_back(canvas);
  }
  return out;
}

} // namespace sketchrnn
