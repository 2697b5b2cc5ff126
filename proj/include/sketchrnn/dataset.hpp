// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "numerics.hpp"
#include "sketch.hpp"

namespace sketchrnn {

// Dataset files are newline-delimited JSON, one sketch per line:
//   {"id": "...", "category": 3, "strokes": [[[x,y], ...], ...]}
// An optional "t" array holds one timestamp array per stroke.

inline nlohmann::json sketch_to_json(const Sketch &sketch) {
  nlohmann::json strokes = nlohmann::json::array();
  nlohmann::json times = nlohmann::json::array();
  bool any_time = false;
  for (const auto &stroke : sketch.strokes) {
    nlohmann::json pts = nlohmann::json::array();
    nlohmann::json ts = nlohmann::json::array();
    for (const auto &p : stroke.points) {
      pts.push_back({p.x, p.y});
      if (p.t) {
        ts.push_back(*p.t);
        any_time = true;
      }
    }
    strokes.push_back(std::move(pts));
    times.push_back(std::move(ts));
  }
  nlohmann::json j = {{"id", sketch.id},
                      {"category", sketch.category},
                      {"strokes", std::move(strokes)}};
  if (any_time)
    j["t"] = std::move(times);
  return j;
}

/// Parses one dataset record; `line_no` is used for error messages only.
inline Sketch sketch_from_json(const nlohmann::json &j, std::size_t line_no) {
  auto field = [&](const char *name) -> const nlohmann::json & {
    if (!j.is_object() || !j.contains(name))
      throw ParseError(line_no, std::string("missing field '") + name + "'");
    return j.at(name);
  };
  Sketch s;
  const auto &id = field("id");
  if (!id.is_string())
    throw ParseError(line_no, "field 'id' must be a string");
  s.id = id.get<std::string>();
  const auto &cat = field("category");
  if (!cat.is_number_integer() || cat.get<long long>() < 0)
    throw ParseError(line_no, "field 'category' must be a non-negative integer");
  s.category = cat.get<int>();

  const auto &strokes = field("strokes");
  if (!strokes.is_array() || strokes.empty())
    throw ParseError(line_no, "field 'strokes' must be a non-empty array");
  const nlohmann::json *times = nullptr;
  if (j.contains("t")) {
    times = &j.at("t");
    if (!times->is_array() || times->size() != strokes.size())
      throw ParseError(line_no, "field 't' must hold one array per stroke");
  }
  for (std::size_t si = 0; si < strokes.size(); ++si) {
    const auto &pts = strokes[si];
    if (!pts.is_array() || pts.empty())
      throw ParseError(line_no, "field 'strokes[" + std::to_string(si) +
                                    "]' must be a non-empty array of points");
    const nlohmann::json *ts = times ? &(*times)[si] : nullptr;
    if (ts && !ts->empty() && ts->size() != pts.size())
      throw ParseError(line_no, "field 't[" + std::to_string(si) +
                                    "]' length differs from its stroke");
    Stroke stroke;
    for (std::size_t pi = 0; pi < pts.size(); ++pi) {
      const auto &p = pts[pi];
      if (!p.is_array() || p.size() != 2 || !p[0].is_number() ||
          !p[1].is_number())
        throw ParseError(line_no, "field 'strokes[" + std::to_string(si) +
                                      "][" + std::to_string(pi) +
                                      "]' must be [x, y]");
      Point pt{p[0].get<double>(), p[1].get<double>(), std::nullopt};
      if (ts && !ts->empty()) {
        if (!(*ts)[pi].is_number())
          throw ParseError(line_no, "field 't[" + std::to_string(si) +
                                        "]' must hold numbers");
        pt.t = (*ts)[pi].get<double>();
      }
      stroke.points.push_back(pt);
    }
    s.strokes.push_back(std::move(stroke));
  }
  return s;
}

inline std::vector<Sketch> read_dataset(std::istream &in) {
  std::vector<Sketch> out;
  std::string line;
  std::size_t line_no = 0;
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
    out.push_back(sketch_from_json(j, line_no));
  }
  return out;
}

inline void write_dataset(const std::vector<Sketch> &sketches,
                          std::ostream &out) {
  for (const auto &s : sketches)
    out << sketch_to_json(s).dump() << '\n';
}

inline std::vector<Sketch> load_dataset(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw InvalidInput("cannot open dataset '" + path + "'");
  return read_dataset(in);
}

inline void save_dataset(const std::vector<Sketch> &sketches,
                         const std::string &path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw InvalidInput("cannot write dataset '" + path + "'");
  write_dataset(sketches, out);
}

/// Label map file: {"0": "circle", "1": "square", ...}. Returned densely by
/// index; gaps are filled with the index itself.
inline std::vector<std::string> load_label_map(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw InvalidInput("cannot open label map '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error &e) {
    throw ParseError(0, "label map '" + path + "': " + e.what());
  }
  if (!j.is_object())
    throw ParseError(0, "label map '" + path + "' must be a JSON object");
  std::map<int, std::string> by_index;
  for (const auto &[key, value] : j.items()) {
    int idx = -1;
    try {
      std::size_t used = 0;
      idx = std::stoi(key, &used);
      if (used != key.size())
        idx = -1;
    } catch (const std::exception &) {
    }
    if (idx < 0 || !value.is_string())
      throw ParseError(0, "label map '" + path + "': bad entry '" + key + "'");
    by_index[idx] = value.get<std::string>();
  }
  std::vector<std::string> names;
  if (!by_index.empty())
    names.resize(static_cast<std::size_t>(by_index.rbegin()->first) + 1);
  for (std::size_t i = 0; i < names.size(); ++i)
    names[i] = std::to_string(i);
  for (const auto &[idx, name] : by_index)
    names[static_cast<std::size_t>(idx)] = name;
  return names;
}

inline void save_label_map(const std::vector<std::string> &names,
                           const std::string &path) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < names.size(); ++i)
    j[std::to_string(i)] = names[i];
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw InvalidInput("cannot write label map '" + path + "'");
  out << j.dump(2) << '\n';
}

struct SplitRatios {
  double train = 0.57;
  double val = 0.18;
  double test = 0.25;
};

/// Disjoint index lists into a dataset, each sorted ascending.
struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Stratified split: each category is shuffled independently and cut into
/// round(train * n) / round(val * n) / remainder.
inline DatasetSplit split_dataset(const std::vector<int> &labels,
                                  SplitRatios ratios, std::uint64_t seed) {
  const std::array<double, 3> r{ratios.train, ratios.val, ratios.test};
  for (double v : r)
    if (!(v >= 0.0) || !std::isfinite(v))
      throw InvalidInput("split ratios must be non-negative");
  if (std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9)
    throw InvalidInput("split ratios must sum to 1");
  const auto bins = std::count_if(r.begin(), r.end(),
                                  [](double v) { return v > 0.0; });

  std::map<int, std::vector<std::size_t>> by_category;
  for (std::size_t i = 0; i < labels.size(); ++i)
    by_category[labels[i]].push_back(i);

  SeededRng rng(seed);
  DatasetSplit split;
  for (auto &[category, members] : by_category) {
    const std::size_t n = members.size();
    if (n < static_cast<std::size_t>(bins))
      throw InvalidInput("category " + std::to_string(category) + " has " +
                         std::to_string(n) + " sketches, fewer than the " +
                         std::to_string(bins) + " split bins");
    rng.shuffle(members);
    const auto n_train =
        std::min(n, static_cast<std::size_t>(std::llround(r[0] * n)));
    const auto n_val = std::min(
        n - n_train, static_cast<std::size_t>(std::llround(r[1] * n)));
    for (std::size_t k = 0; k < n; ++k) {
      auto &dest = k < n_train ? split.train
                   : k < n_train + n_val ? split.val
                                         : split.test;
      dest.push_back(members[k]);
    }
  }
  for (auto *v : {&split.train, &split.val, &split.test})
    std::sort(v->begin(), v->end());
  return split;
}

} // namespace sketchrnn
