// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "numerics.hpp"
#include "sketch.hpp"

namespace sketchrnn {

/// Procedural shape classes, in label order.
inline constexpr std::array<std::string_view, 8> kSynthClassNames{
    "circle", "square", "triangle", "star",
    "zigzag", "spiral", "plus",     "arrow"};

struct SynthConfig {
  double max_rotation_deg = 25.0;
  double min_scale = 0.6;
  double max_scale = 1.0;
  double jitter_sigma = 0.01;
  int min_strokes = 2;
  int max_strokes = 8;
  int samples = 64; // points along each outline
  double margin = 0.02;
  double max_offset = 0.5; // shape center offset from (0.5, 0.5), per axis

  nlohmann::json to_json() const {
    return {{"max_rotation_deg", max_rotation_deg},
            {"min_scale", min_scale},
            {"max_scale", max_scale},
            {"jitter_sigma", jitter_sigma},
            {"min_strokes", min_strokes},
            {"max_strokes", max_strokes},
            {"samples", samples},
            {"margin", margin},
            {"max_offset", max_offset}};
  }
};

namespace detail {

struct Vec2 {
  double x, y;
};

inline std::vector<Vec2> regular_polygon(int sides, double phase_deg,
                                         std::initializer_list<double> radii) {
  std::vector<Vec2> pts;
  const std::vector<double> r(radii);
  const int n = sides * static_cast<int>(r.size());
  for (int i = 0; i <= n; ++i) {
    const double a = (phase_deg * std::numbers::pi / 180.0) +
                     2.0 * std::numbers::pi * i / n;
    const double rad = r[static_cast<std::size_t>(i) % r.size()];
    pts.push_back({rad * std::cos(a), rad * std::sin(a)});
  }
  return pts;
}

/// Control polyline of a class in the [-1,1]^2 box (y grows downward).
inline std::vector<Vec2> shape_outline(int cls) {
  switch (cls) {
  case 0: // circle
    return regular_polygon(48, 0.0, {1.0});
  case 1: // square
    return {{-1, -1}, {1, -1}, {1, 1}, {-1, 1}, {-1, -1}};
  case 2: // triangle
    return regular_polygon(3, -90.0, {1.0});
  case 3: // five-point star
    return regular_polygon(5, -90.0, {1.0, 0.382});
  case 4: // zigzag
    return {{-1, -0.5}, {-0.6, 0.5}, {-0.2, -0.5},
            {0.2, 0.5},  {0.6, -0.5}, {1.0, 0.5}};
  case 5: { // spiral, 2.5 turns outward
    std::vector<Vec2> pts;
    const int n = 120;
    for (int i = 0; i <= n; ++i) {
      const double u = static_cast<double>(i) / n;
      const double a = u * 5.0 * std::numbers::pi;
      pts.push_back({u * std::cos(a), u * std::sin(a)});
    }
    return pts;
  }
  case 6: { // plus-cross outline
    const double w = 0.3;
    return {{-w, -1}, {w, -1}, {w, -w}, {1, -w},  {1, w},   {w, w}, {w, 1},
            {-w, 1},  {-w, w}, {-1, w}, {-1, -w}, {-w, -w}, {-w, -1}};
  }
  case 7: // arrow: shaft then both barbs
    return {{-1, 0}, {1, 0}, {0.45, -0.55}, {1, 0}, {0.45, 0.55}};
  default:
    throw InvalidInput("unknown synthetic class " + std::to_string(cls));
  }
}

/// `count` points spaced evenly by arc length, endpoints kept.
inline std::vector<Vec2> resample(const std::vector<Vec2> &poly, int count) {
  std::vector<double> cum{0.0};
  for (std::size_t i = 1; i < poly.size(); ++i)
    cum.push_back(cum.back() + std::hypot(poly[i].x - poly[i - 1].x,
                                          poly[i].y - poly[i - 1].y));
  const double total = cum.back();
  std::vector<Vec2> out;
  std::size_t seg = 1;
  for (int k = 0; k < count; ++k) {
    const double s = total * k / (count - 1);
    while (seg + 1 < poly.size() && cum[seg] < s)
      ++seg;
    const double len = cum[seg] - cum[seg - 1];
    const double u = len > 0.0 ? std::clamp((s - cum[seg - 1]) / len, 0.0, 1.0)
                               : 0.0;
    out.push_back({poly[seg - 1].x + u * (poly[seg].x - poly[seg - 1].x),
                   poly[seg - 1].y + u * (poly[seg].y - poly[seg - 1].y)});
  }
  return out;
}

} // namespace detail

/// Draws one instance of class `cls`: random rotation, scale and placement,
/// per-point Gaussian jitter, outline cut into a random number of strokes.
inline Sketch synth_instance(int cls, const std::string &id, SeededRng &rng,
                             const SynthConfig &cfg = {}) {
  auto pts = detail::resample(detail::shape_outline(cls), cfg.samples);

  const double angle = rng.uniform(-cfg.max_rotation_deg, cfg.max_rotation_deg) *
                       std::numbers::pi / 180.0;
  const double scale = 0.45 * rng.uniform(cfg.min_scale, cfg.max_scale);
  const double ca = std::cos(angle), sa = std::sin(angle);
  double min_x = INFINITY, max_x = -INFINITY, min_y = INFINITY, max_y = -INFINITY;
  for (auto &p : pts) {
    const double x = scale * (ca * p.x - sa * p.y);
    const double y = scale * (sa * p.x + ca * p.y);
    p = {x, y};
    min_x = std::min(min_x, x);
    max_x = std::max(max_x, x);
    min_y = std::min(min_y, y);
    max_y = std::max(max_y, y);
  }
  // Center offset limited by max_offset and by keeping the shape inside
  // [margin, 1 - margin].
  auto center = [&](double lo_ext, double hi_ext) {
    const double lo = std::max(0.5 - cfg.max_offset, cfg.margin - lo_ext);
    const double hi = std::min(0.5 + cfg.max_offset, 1.0 - cfg.margin - hi_ext);
    return lo < hi ? rng.uniform(lo, hi) : 0.5 * (lo + hi);
  };
  const double cx = center(min_x, max_x);
  const double cy = center(min_y, max_y);

  std::vector<Point> placed;
  placed.reserve(pts.size());
  for (const auto &p : pts) {
    const double x = std::clamp(cx + p.x + cfg.jitter_sigma * rng.normal(), 0.0, 1.0);
    const double y = std::clamp(cy + p.y + cfg.jitter_sigma * rng.normal(), 0.0, 1.0);
    placed.push_back({x, y, std::nullopt});
  }

  // k strokes from k-1 distinct interior cut points; neighbouring strokes
  // share the cut point so the outline stays connected.
  const int strokes = rng.uniform_int(cfg.min_strokes, cfg.max_strokes);
  std::vector<std::size_t> interior;
  for (std::size_t i = 1; i + 1 < placed.size(); ++i)
    interior.push_back(i);
  rng.shuffle(interior);
  std::vector<std::size_t> cuts(interior.begin(),
                                interior.begin() + (strokes - 1));
  std::sort(cuts.begin(), cuts.end());
  cuts.insert(cuts.begin(), 0);
  cuts.push_back(placed.size() - 1);

  Sketch sketch{id, cls, {}};
  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    Stroke stroke;
    stroke.points.assign(placed.begin() + static_cast<long>(cuts[s]),
                         placed.begin() + static_cast<long>(cuts[s + 1]) + 1);
    sketch.strokes.push_back(std::move(stroke));
  }
  return sketch;
}

/// `per_class` instances of each of the first `classes` shape classes,
/// class-major order, fully determined by `seed`.
inline std::vector<Sketch> synth_generate(int classes, int per_class,
                                          std::uint64_t seed,
                                          const SynthConfig &cfg = {}) {
  if (classes < 1 || classes > static_cast<int>(kSynthClassNames.size()))
    throw InvalidInput("synthetic class count must be in [1, 8], got " +
                       std::to_string(classes));
  if (per_class < 1)
    throw InvalidInput("per_class must be >= 1");
  if (cfg.min_strokes < 1 || cfg.max_strokes < cfg.min_strokes ||
      cfg.samples < cfg.max_strokes + 1)
    throw InvalidConfig("inconsistent stroke-count configuration");
  SeededRng rng(seed);
  std::vector<Sketch> out;
  out.reserve(static_cast<std::size_t>(classes) * per_class);
  for (int c = 0; c < classes; ++c)
    for (int i = 0; i < per_class; ++i)
      out.push_back(synth_instance(
          c, std::string(kSynthClassNames[c]) + "-" + std::to_string(i), rng,
          cfg));
  return out;
}

inline std::vector<std::string> synth_label_names(int classes) {
  std::vector<std::string> names;
  for (int c = 0; c < classes && c < static_cast<int>(kSynthClassNames.size()); ++c)
    names.emplace_back(kSynthClassNames[c]);
  return names;
}

} // namespace sketchrnn
