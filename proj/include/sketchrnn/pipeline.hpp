// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "errors.hpp"
#include "features.hpp"
#include "sketch.hpp"
#include "training.hpp"

namespace sketchrnn {

/// Rasterizes and extracts features for every sketch.
inline LabeledSequences featurize(const std::vector<Sketch> &sketches,
                                  const FeatureConfig &config) {
  LabeledSequences out;
  for (const auto &s : sketches)
    out.push_back(s.id, sketch_features(s, config), s.category);
  return out;
}

/// Pairs sketches with externally computed feature sequences by id.
inline LabeledSequences
attach_imported(const std::vector<Sketch> &sketches,
                const std::map<std::string, FeatureSequence> &features) {
  LabeledSequences out;
  for (const auto &s : sketches) {
    const auto it = features.find(s.id);
    if (it == features.end())
      throw InvalidInput("no imported features for sketch '" + s.id + "'");
    out.push_back(s.id, it->second, s.category);
  }
  return out;
}

inline std::vector<int> labels_of(const std::vector<Sketch> &sketches) {
  std::vector<int> labels;
  labels.reserve(sketches.size());
  for (const auto &s : sketches)
    labels.push_back(s.category);
  return labels;
}

} // namespace sketchrnn
