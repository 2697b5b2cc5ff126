// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "numerics.hpp"
#include "raster.hpp"
#include "sketch.hpp"

namespace sketchrnn {

/// Per-timestep input vectors x_1..x_N, all of dimension `dim`.
struct FeatureSequence {
  std::size_t dim = 0;
  std::vector<Vector> steps;

  std::size_t length() const noexcept { return steps.size(); }

  void validate() const {
    if (steps.empty())
      throw InvalidInput("feature sequence is empty");
    for (std::size_t t = 0; t < steps.size(); ++t)
      if (steps[t].size() != dim)
        throw DimensionError("feature step " + std::to_string(t) + " has " +
                             std::to_string(steps[t].size()) +
                             " entries, expected " + std::to_string(dim));
  }

  /// Leading `count` steps.
  FeatureSequence prefix(std::size_t count) const {
    FeatureSequence out{dim, {}};
    out.steps.assign(steps.begin(),
                     steps.begin() + static_cast<long>(std::min(count, steps.size())));
    return out;
  }

  friend bool operator==(const FeatureSequence &,
                         const FeatureSequence &) = default;
};

/// Describes where features come from so a checkpoint can be replayed on
/// new sketches. `occupancy` pools a `grid` x `grid` cumulative raster into
/// `cells` x `cells` ink fractions; `imported` means an external file.
/// With `normalize` set, whole sketches are bounding-box normalized before
/// rasterization (online sessions cannot do this; their clients must).
struct FeatureConfig {
  std::string kind = "occupancy";
  int grid = 96;
  int cells = 24;
  bool normalize = true;
  std::size_t imported_dim = 0;

  bool is_occupancy() const noexcept { return kind == "occupancy"; }

  std::size_t dim() const {
    return is_occupancy() ? static_cast<std::size_t>(cells) * cells
                          : imported_dim;
  }

  void validate() const {
    if (is_occupancy()) {
      if (grid < 4 || cells < 1 || grid % cells != 0)
        throw InvalidConfig("occupancy features need grid >= 4 divisible by "
                            "cells; got grid=" + std::to_string(grid) +
                            " cells=" + std::to_string(cells));
    } else if (kind == "imported") {
      if (imported_dim == 0)
        throw InvalidConfig("imported features need a positive dimension");
    } else {
      throw InvalidConfig("unknown feature extractor '" + kind + "'");
    }
  }

  nlohmann::json to_json() const {
    if (is_occupancy())
      return {{"kind", kind}, {"grid", grid}, {"cells", cells},
              {"normalize", normalize}, {"dim", dim()}};
    return {{"kind", kind}, {"dim", imported_dim}};
  }

  static FeatureConfig from_json(const nlohmann::json &j) {
    FeatureConfig c;
    c.kind = j.at("kind").get<std::string>();
    if (c.is_occupancy()) {
      c.grid = j.at("grid").get<int>();
      c.cells = j.at("cells").get<int>();
      c.normalize = j.at("normalize").get<bool>();
    } else {
      c.imported_dim = j.at("dim").get<std::size_t>();
    }
    c.validate();
    return c;
  }

  friend bool operator==(const FeatureConfig &,
                         const FeatureConfig &) = default;
};

/// Fraction of on-pixels in each block, flattened row-major.
inline Vector occupancy_features(const RasterImage &img,
                                 const FeatureConfig &config) {
  config.validate();
  if (!config.is_occupancy())
    throw InvalidConfig("occupancy_features: extractor is '" + config.kind +
                        "'");
  if (img.side() != config.grid)
    throw InvalidConfig("raster side " + std::to_string(img.side()) +
                        " does not match extractor grid " +
                        std::to_string(config.grid));
  const int block = config.grid / config.cells;
  const double area = static_cast<double>(block) * block;
  Vector out(config.dim(), 0.0);
  for (int y = 0; y < config.grid; ++y)
    for (int x = 0; x < config.grid; ++x)
      if (img.at(x, y))
        out[static_cast<std::size_t>(y / block) * config.cells + x / block] +=
            1.0;
  for (double &v : out)
    v /= area;
  return out;
}

inline FeatureSequence extract_features(const std::vector<RasterImage> &rasters,
                                        const FeatureConfig &config) {
  FeatureSequence seq{config.dim(), {}};
  seq.steps.reserve(rasters.size());
  for (const auto &img : rasters)
    seq.steps.push_back(occupancy_features(img, config));
  return seq;
}

inline FeatureSequence sketch_features(const Sketch &sketch,
                                       const FeatureConfig &config) {
  config.validate();
  if (!config.is_occupancy())
    throw InvalidConfig("features for '" + sketch.id +
                        "' must be imported; extractor is '" + config.kind +
                        "'");
  return extract_features(
      rasterize_cumulative(config.normalize ? normalize_sketch(sketch) : sketch,
                           config.grid),
      config);
}

/// Reads newline-delimited `{"id", "d", "features": [[...], ...]}` records.
/// Every record must share one dimension.
inline std::map<std::string, FeatureSequence>
read_feature_sequences(std::istream &in) {
  std::map<std::string, FeatureSequence> out;
  std::string line;
  std::size_t line_no = 0;
  std::size_t common_dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error &e) {
      throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
    }
    FeatureSequence seq;
    std::string id;
    try {
      id = j.at("id").get<std::string>();
      seq.dim = j.at("d").get<std::size_t>();
      for (const auto &row : j.at("features"))
        seq.steps.push_back(row.get<Vector>());
    } catch (const nlohmann::json::exception &e) {
      throw ParseError(line_no, std::string("bad feature record: ") + e.what());
    }
    if (seq.steps.empty())
      throw ParseError(line_no, "record '" + id + "' has no feature rows");
    for (const auto &row : seq.steps)
      if (row.size() != seq.dim)
        throw DimensionError("line " + std::to_string(line_no) + ": row of " +
                             std::to_string(row.size()) +
                             " values, declared d=" + std::to_string(seq.dim));
    if (common_dim == 0)
      common_dim = seq.dim;
    else if (seq.dim != common_dim)
      throw DimensionError("line " + std::to_string(line_no) + ": d=" +
                           std::to_string(seq.dim) + " differs from d=" +
                           std::to_string(common_dim));
    if (!out.emplace(id, std::move(seq)).second)
      throw ParseError(line_no, "duplicate id '" + id + "'");
  }
  return out;
}

inline std::map<std::string, FeatureSequence>
import_feature_sequences(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw InvalidInput("cannot open feature file '" + path + "'");
  return read_feature_sequences(in);
}

} // namespace sketchrnn
