// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "model.hpp"
#include "pooling.hpp"
#include "training.hpp"

namespace sketchrnn {

struct Misclassified {
  std::string id;
  std::size_t truth = 0;
  std::size_t predicted = 0;

  friend bool operator==(const Misclassified &, const Misclassified &) = default;
};

struct EvalReport {
  std::size_t total = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  std::vector<std::size_t> per_category_count;
  std::vector<double> per_category_accuracy; // 0 for categories with no items
  std::vector<std::vector<std::size_t>> confusion; // [truth][predicted]
  std::vector<Misclassified> misclassified;
  std::vector<std::size_t> predictions; // per input, in input order

  friend bool operator==(const EvalReport &, const EvalReport &) = default;
};

/// Inference-mode forward + pooling for every sequence, tallied.
inline EvalReport evaluate(const Model &model, const LabeledSequences &data,
                           const PoolingScheme &scheme) {
  if (data.size() == 0)
    throw InvalidInput("evaluate: empty test set");
  const auto k = model.classes();
  EvalReport r;
  r.per_category_count.assign(k, 0);
  r.per_category_accuracy.assign(k, 0.0);
  r.confusion.assign(k, std::vector<std::size_t>(k, 0));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto truth = static_cast<std::size_t>(data.labels[i]);
    if (data.labels[i] < 0 || truth >= k)
      throw InvalidInput("evaluate: label " + std::to_string(data.labels[i]) +
                         " of '" + data.ids[i] + "' outside the model's " +
                         std::to_string(k) + " categories");
    const auto pred =
        pool_prediction(predict_probabilities(model, data.sequences[i]), scheme)
            .label;
    r.predictions.push_back(pred);
    ++r.confusion[truth][pred];
    ++r.per_category_count[truth];
    if (pred == truth)
      ++r.correct;
    else
      r.misclassified.push_back({data.ids[i], truth, pred});
  }
  r.total = data.size();
  r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.total);
  for (std::size_t c = 0; c < k; ++c)
    if (r.per_category_count[c])
      r.per_category_accuracy[c] = static_cast<double>(r.confusion[c][c]) /
                                   static_cast<double>(r.per_category_count[c]);
  return r;
}

inline constexpr std::array<int, 5> kCompletionLevels{20, 40, 60, 80, 100};

struct CompletionPoint {
  int percent = 0;     // x
  double fraction = 0; // t_x

  friend bool operator==(const CompletionPoint &,
                         const CompletionPoint &) = default;
};

struct CompletionCurve {
  std::vector<CompletionPoint> points;

  friend bool operator==(const CompletionCurve &,
                         const CompletionCurve &) = default;
};

/// Strokes kept when only the first `percent`% of N are available.
inline std::size_t prefix_length(std::size_t n, int percent) {
  const auto keep = (static_cast<std::size_t>(percent) * n + 99) / 100;
  return std::max<std::size_t>(1, keep);
}

/// Fraction of sketches recognized from their first x% of strokes, for
/// x = 20..100. Each prefix is pooled with its own length as N. The
/// recurrence is causal and inference is deterministic, so the prefix
/// outputs are the leading rows of the full-sequence outputs.
inline CompletionCurve completion_curve(const Model &model,
                                        const LabeledSequences &data,
                                        const PoolingScheme &scheme) {
  if (data.size() == 0)
    throw InvalidInput("completion_curve: empty test set");
  std::array<std::size_t, kCompletionLevels.size()> correct{};
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto probs = predict_probabilities(model, data.sequences[i]);
    const auto truth = static_cast<std::size_t>(data.labels[i]);
    for (std::size_t l = 0; l < kCompletionLevels.size(); ++l) {
      const auto n = prefix_length(probs.size(), kCompletionLevels[l]);
      const std::span<const Vector> prefix(probs.data(), n);
      if (pool_prediction(prefix, scheme).label == truth)
        ++correct[l];
    }
  }
  CompletionCurve curve;
  for (std::size_t l = 0; l < kCompletionLevels.size(); ++l)
    curve.points.push_back({kCompletionLevels[l],
                            static_cast<double>(correct[l]) /
                                static_cast<double>(data.size())});
  return curve;
}

inline std::string category_name(const std::vector<std::string> &names,
                                 std::size_t idx) {
  return idx < names.size() ? names[idx] : std::to_string(idx);
}

inline nlohmann::ordered_json to_json(const EvalReport &r,
                                      const std::vector<std::string> &names) {
  nlohmann::ordered_json j;
  j["total"] = r.total;
  j["correct"] = r.correct;
  j["accuracy"] = r.accuracy;
  nlohmann::ordered_json cats = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < r.per_category_count.size(); ++c)
    cats.push_back({{"category", c},
                    {"name", category_name(names, c)},
                    {"count", r.per_category_count[c]},
                    {"accuracy", r.per_category_accuracy[c]}});
  j["per_category"] = std::move(cats);
  j["confusion"] = r.confusion;
  nlohmann::ordered_json mis = nlohmann::ordered_json::array();
  for (const auto &m : r.misclassified)
    mis.push_back({{"id", m.id},
                   {"truth", m.truth},
                   {"truth_name", category_name(names, m.truth)},
                   {"predicted", m.predicted},
                   {"predicted_name", category_name(names, m.predicted)}});
  j["misclassified"] = std::move(mis);
  return j;
}

/// One row per category plus an `all` row.
inline void write_csv(const EvalReport &r, const std::vector<std::string> &names,
                      std::ostream &out) {
  out << "category,name,count,correct,accuracy\n";
  const auto old = out.precision(17);
  for (std::size_t c = 0; c < r.per_category_count.size(); ++c)
    out << c << ',' << category_name(names, c) << ','
        << r.per_category_count[c] << ',' << r.confusion[c][c] << ','
        << r.per_category_accuracy[c] << '\n';
  out << "all,all," << r.total << ',' << r.correct << ',' << r.accuracy << '\n';
  out.precision(old);
}

inline nlohmann::ordered_json to_json(const CompletionCurve &c) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto &p : c.points)
    j.push_back({{"x", p.percent}, {"t_x", p.fraction}});
  return j;
}

inline void write_csv(const CompletionCurve &c, std::ostream &out) {
  out << "x,t_x\n";
  const auto old = out.precision(17);
  for (const auto &p : c.points)
    out << p.percent << ',' << p.fraction << '\n';
  out.precision(old);
}

} // namespace sketchrnn
