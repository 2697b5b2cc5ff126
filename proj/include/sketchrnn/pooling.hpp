// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "numerics.hpp"
#include "schedule.hpp"

namespace sketchrnn {

/// How per-step softmax outputs p_1..p_N become one category.
struct PoolingScheme {
  enum class Kind { weighted_sum, last, max, mean };

  Kind kind = Kind::weighted_sum;
  double alpha = 10.0; // weighted_sum only

  static PoolingScheme weighted(double alpha) {
    return {Kind::weighted_sum, alpha};
  }

  std::string name() const {
    switch (kind) {
    case Kind::weighted_sum:
      return "weighted";
    case Kind::last:
      return "last";
    case Kind::max:
      return "max";
    case Kind::mean:
      return "mean";
    }
    return "?";
  }

  static PoolingScheme parse(const std::string &name, double alpha = 10.0) {
    if (name == "weighted" || name == "weighted-sum")
      return {Kind::weighted_sum, alpha};
    if (name == "last")
      return {Kind::last, alpha};
    if (name == "max")
      return {Kind::max, alpha};
    if (name == "mean")
      return {Kind::mean, alpha};
    throw InvalidConfig("unknown pooling scheme '" + name +
                        "' (expected weighted, last, max or mean)");
  }
};

/// Index of the largest score; lowest index wins ties.
inline std::size_t argmax(std::span<const double> scores) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < scores.size(); ++j)
    if (scores[j] > scores[best])
      best = j;
  return best;
}

struct PooledPrediction {
  std::size_t label = 0;
  Vector scores;
};

/// Pools with explicit per-step weights: scores_j = sum_t w_t p_t[j].
inline PooledPrediction pool_weighted(std::span<const Vector> probs,
                                      std::span<const double> weights) {
  if (probs.empty())
    throw InvalidInput("pool_prediction: empty trace");
  if (weights.size() != probs.size())
    throw ContractError("pool_weighted: " + std::to_string(probs.size()) +
                        " steps but " + std::to_string(weights.size()) +
                        " weights");
  PooledPrediction out{0, Vector(probs.front().size(), 0.0)};
  for (std::size_t t = 0; t < probs.size(); ++t)
    for (std::size_t j = 0; j < out.scores.size(); ++j)
      out.scores[j] += weights[t] * probs[t][j];
  out.label = argmax(out.scores);
  return out;
}

inline PooledPrediction pool_prediction(std::span<const Vector> probs,
                                        const PoolingScheme &scheme) {
  if (probs.empty())
    throw InvalidInput("pool_prediction: empty trace");
  const auto k = probs.front().size();
  for (const auto &p : probs)
    if (p.size() != k)
      throw DimensionError("pool_prediction: ragged probability rows");

  using Kind = PoolingScheme::Kind;
  if (scheme.kind == Kind::weighted_sum) {
    if (!(scheme.alpha >= 0.0))
      throw InvalidConfig("weighted pooling needs alpha >= 0");
    const Vector w =
        loss_weights(LossSchedule::exponential(scheme.alpha), probs.size());
    return pool_weighted(probs, w);
  }

  PooledPrediction out;
  switch (scheme.kind) {
  case Kind::last:
    out.scores = probs.back();
    break;
  case Kind::max:
    out.scores = probs.front();
    for (const auto &p : probs.subspan(1))
      for (std::size_t j = 0; j < k; ++j)
        out.scores[j] = std::max(out.scores[j], p[j]);
    break;
  case Kind::mean:
    out.scores.assign(k, 0.0);
    for (const auto &p : probs)
      for (std::size_t j = 0; j < k; ++j)
        out.scores[j] += p[j];
    for (double &s : out.scores)
      s /= static_cast<double>(probs.size());
    break;
  case Kind::weighted_sum:
    break;
  }
  out.label = argmax(out.scores);
  return out;
}

/// Up to k (index, score) pairs by descending score, lower index first on
/// ties.
inline std::vector<std::pair<std::size_t, double>>
top_k(std::span<const double> scores, std::size_t k) {
  std::vector<std::pair<std::size_t, double>> all;
  all.reserve(scores.size());
  for (std::size_t j = 0; j < scores.size(); ++j)
    all.emplace_back(j, scores[j]);
  std::stable_sort(all.begin(), all.end(), [](const auto &a, const auto &b) {
    return a.second > b.second;
  });
  all.resize(std::min(k, all.size()));
  return all;
}

} // namespace sketchrnn
