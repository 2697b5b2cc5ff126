// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "numerics.hpp"

namespace sketchrnn {

/// Per-timestep loss weighting w_1..w_N.
///   exponential: w_t = exp(-alpha (1 - t/N))
///   linear:      w_t = t / N
///   last-only:   w_t = 0 for t < N, w_N = 1
struct LossSchedule {
  enum class Kind { exponential, linear, last_only };

  Kind kind = Kind::exponential;
  double alpha = 10.0;

  static LossSchedule exponential(double alpha) {
    return {Kind::exponential, alpha};
  }
  static LossSchedule linear() { return {Kind::linear, 0.0}; }
  static LossSchedule last_only() { return {Kind::last_only, 0.0}; }

  std::string name() const {
    switch (kind) {
    case Kind::exponential:
      return "exponential";
    case Kind::linear:
      return "linear";
    case Kind::last_only:
      return "last";
    }
    return "?";
  }

  static LossSchedule parse(const std::string &name, double alpha = 10.0) {
    if (name == "exponential" || name == "exp")
      return exponential(alpha);
    if (name == "linear")
      return linear();
    if (name == "last" || name == "last-only")
      return last_only();
    throw InvalidConfig("unknown loss schedule '" + name + "'");
  }

  nlohmann::json to_json() const {
    nlohmann::json j = {{"kind", name()}};
    if (kind == Kind::exponential)
      j["alpha"] = alpha;
    return j;
  }
  static LossSchedule from_json(const nlohmann::json &j) {
    return parse(j.at("kind").get<std::string>(), j.value("alpha", 10.0));
  }

  friend bool operator==(const LossSchedule &, const LossSchedule &) = default;
};

inline Vector loss_weights(const LossSchedule &schedule, std::size_t n) {
  if (n == 0)
    throw InvalidInput("loss_weights: sequence length must be >= 1");
  if (schedule.kind == LossSchedule::Kind::exponential &&
      !(schedule.alpha >= 0.0 && std::isfinite(schedule.alpha)))
    throw InvalidConfig("exponential schedule needs a finite alpha >= 0");
  Vector w(n);
  const double len = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i + 1);
    switch (schedule.kind) {
    case LossSchedule::Kind::exponential:
      // (N - t) / N is exact for the t = N term, so w_N is exactly 1.
      w[i] = std::exp(-schedule.alpha * ((len - t) / len));
      break;
    case LossSchedule::Kind::linear:
      w[i] = t / len;
      break;
    case LossSchedule::Kind::last_only:
      w[i] = i + 1 == n ? 1.0 : 0.0;
      break;
    }
  }
  return w;
}

} // namespace sketchrnn
