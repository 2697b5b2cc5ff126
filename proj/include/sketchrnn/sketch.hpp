// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"

namespace sketchrnn {

/// Canvas coordinates, normalized to [0,1] with the origin top-left.
struct Point {
  double x = 0.0;
  double y = 0.0;
  std::optional<double> t; // ms since sketch start; carried, not used

  friend bool operator==(const Point &, const Point &) = default;
};

struct Stroke {
  std::vector<Point> points;

  friend bool operator==(const Stroke &, const Stroke &) = default;
};

struct Sketch {
  std::string id;
  int category = 0;
  std::vector<Stroke> strokes;

  std::size_t point_count() const {
    std::size_t n = 0;
    for (const auto &s : strokes)
      n += s.points.size();
    return n;
  }

  friend bool operator==(const Sketch &, const Sketch &) = default;
};

/// Scales and translates (aspect preserving) so the bounding box fits
/// [0.05, 0.95]^2, centered on both axes. Zero-extent sketches collapse to
/// (0.5, 0.5).
inline Sketch normalize_sketch(Sketch sketch) {
  double min_x = INFINITY, max_x = -INFINITY;
  double min_y = INFINITY, max_y = -INFINITY;
  std::size_t count = 0;
  for (const auto &stroke : sketch.strokes)
    for (const auto &p : stroke.points) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y))
        throw InvalidInput("normalize_sketch: non-finite coordinate in '" +
                           sketch.id + "'");
      min_x = std::min(min_x, p.x);
      max_x = std::max(max_x, p.x);
      min_y = std::min(min_y, p.y);
      max_y = std::max(max_y, p.y);
      ++count;
    }
  if (count == 0)
    throw InvalidInput("normalize_sketch: sketch '" + sketch.id +
                       "' has no points");

  const double extent = std::max(max_x - min_x, max_y - min_y);
  const double cx = 0.5 * (min_x + max_x);
  const double cy = 0.5 * (min_y + max_y);
  const double scale = extent > 0.0 ? 0.9 / extent : 0.0;
  for (auto &stroke : sketch.strokes)
    for (auto &p : stroke.points) {
      p.x = 0.5 + (p.x - cx) * scale;
      p.y = 0.5 + (p.y - cy) * scale;
    }
  return sketch;
}

/// First `count` strokes of a sketch (at least one).
inline Sketch truncate_strokes(const Sketch &sketch, std::size_t count) {
  Sketch out{sketch.id, sketch.category, {}};
  count = std::clamp<std::size_t>(count, 1, sketch.strokes.size());
  out.strokes.assign(sketch.strokes.begin(),
                     sketch.strokes.begin() + static_cast<long>(count));
  return out;
}

} // namespace sketchrnn
