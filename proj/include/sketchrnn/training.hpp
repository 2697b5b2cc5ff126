// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "batching.hpp"
#include "dataset.hpp"
#include "errors.hpp"
#include "features.hpp"
#include "model.hpp"
#include "numerics.hpp"
#include "pooling.hpp"
#include "schedule.hpp"

namespace sketchrnn {

inline constexpr double kLogClamp = 1e-12;

/// L = sum_t w_t * -log p_t[label], with p clamped at 1e-12.
inline double sequence_loss(std::span<const Vector> probs, std::size_t label,
                            std::span<const double> weights) {
  if (weights.size() != probs.size())
    throw ContractError("sequence_loss: " + std::to_string(probs.size()) +
                        " steps but " + std::to_string(weights.size()) +
                        " weights");
  double loss = 0.0;
  for (std::size_t t = 0; t < probs.size(); ++t) {
    if (label >= probs[t].size())
      throw ContractError("sequence_loss: label " + std::to_string(label) +
                          " out of range for K=" +
                          std::to_string(probs[t].size()));
    if (weights[t] == 0.0)
      continue;
    loss += weights[t] * -std::log(std::max(probs[t][label], kLogClamp));
  }
  return loss;
}

/// theta <- theta - lr * grad, for every tensor. Plain SGD.
inline void sgd_step(Model &params, const Model &grads, double lr) {
  std::vector<const DenseMatrix *> g;
  grads.for_each_tensor(
      [&](std::string_view, const DenseMatrix &t) { g.push_back(&t); });
  std::size_t i = 0;
  bool mismatch = params.kind() != grads.kind();
  params.for_each_tensor([&](std::string_view, DenseMatrix &t) {
    if (mismatch || i >= g.size() || !t.same_shape(*g[i]))
      mismatch = true;
    else
      ++i;
  });
  if (mismatch || i != g.size())
    throw ContractError("sgd_step: gradient shapes do not match parameters");

  i = 0;
  const bool skip_output_bias = !params.head.use_bias;
  params.for_each_tensor([&](std::string_view name, DenseMatrix &t) {
    const auto gd = g[i++]->data();
    if (skip_output_bias && name == "b_y")
      return;
    auto td = t.data();
    for (std::size_t k = 0; k < td.size(); ++k)
      td[k] -= lr * gd[k];
  });
}

/// grad += other
inline void add_gradients(Model &grad, const Model &other) {
  std::vector<const DenseMatrix *> src;
  other.for_each_tensor(
      [&](std::string_view, const DenseMatrix &t) { src.push_back(&t); });
  std::size_t i = 0;
  grad.for_each_tensor([&](std::string_view, DenseMatrix &t) {
    const auto s = src.at(i++)->data();
    auto d = t.data();
    if (s.size() != d.size())
      throw ContractError("add_gradients: shape mismatch");
    for (std::size_t k = 0; k < d.size(); ++k)
      d[k] += s[k];
  });
}

inline void scale_gradients(Model &grad, double factor) {
  grad.for_each_tensor([&](std::string_view, DenseMatrix &t) {
    for (double &v : t.data())
      v *= factor;
  });
}

/// Forward (training mode) + backward for one labelled sequence. Adds the
/// gradient into `grad` and returns the weighted loss.
inline double accumulate_sequence_gradient(const Model &m,
                                           const FeatureSequence &x,
                                           std::size_t label,
                                           std::span<const double> weights,
                                           double dropout_rate, SeededRng &rng,
                                           Model &grad) {
  return std::visit(
      [&](const auto &cell) {
        const auto trace =
            forward_sequence(cell, m.head, x, dropout_rate, &rng, true);
        const double loss = sequence_loss(trace.probs, label, weights);
        auto g = backward_sequence(cell, m.head, x, trace, label, weights);
        Model partial{std::move(g.cell), std::move(g.head)};
        add_gradients(grad, partial);
        return loss;
      },
      m.cell);
}

/// Feature sequences with their category labels.
struct LabeledSequences {
  std::vector<std::string> ids;
  std::vector<FeatureSequence> sequences;
  std::vector<int> labels;

  std::size_t size() const noexcept { return sequences.size(); }

  void push_back(std::string id, FeatureSequence seq, int label) {
    ids.push_back(std::move(id));
    sequences.push_back(std::move(seq));
    labels.push_back(label);
  }

  LabeledSequences subset(std::span<const std::size_t> indices) const {
    LabeledSequences out;
    for (auto i : indices)
      out.push_back(ids.at(i), sequences.at(i), labels.at(i));
    return out;
  }
};

struct TrainConfig {
  double learning_rate = 0.001;
  int epochs = 30;
  std::size_t max_batch = 4;
  std::size_t hidden = 64;
  double dropout = 0.5;
  LossSchedule schedule = LossSchedule::exponential(10.0);
  std::uint64_t seed = 1;
  CellKind cell = CellKind::gru;
  bool output_bias = true;
  /// Alpha for weighted-sum pooling during validation; defaults to the
  /// schedule's alpha (10 when the schedule has none).
  std::optional<double> pool_alpha;
  SplitRatios split;
  std::uint64_t split_seed = 1;

  double effective_pool_alpha() const {
    if (pool_alpha)
      return *pool_alpha;
    return schedule.kind == LossSchedule::Kind::exponential ? schedule.alpha
                                                            : 10.0;
  }

  void validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
      throw InvalidConfig("learning rate must be > 0");
    if (!(dropout >= 0.0 && dropout < 1.0))
      throw InvalidConfig("dropout must be in [0, 1)");
    if (epochs < 0)
      throw InvalidConfig("epochs must be >= 0");
    if (max_batch == 0)
      throw InvalidConfig("max_batch must be >= 1");
    if (hidden == 0)
      throw InvalidConfig("hidden size must be >= 1");
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["learning_rate"] = learning_rate;
    j["epochs"] = epochs;
    j["max_batch"] = max_batch;
    j["hidden"] = hidden;
    j["dropout"] = dropout;
    j["schedule"] = schedule.to_json();
    j["seed"] = seed;
    j["cell"] = to_string(cell);
    j["output_bias"] = output_bias;
    j["pool_alpha"] = effective_pool_alpha();
    j["split"] = {split.train, split.val, split.test};
    j["split_seed"] = split_seed;
    j["init"] = "uniform +-sqrt(6/(fan_in+fan_out)), zero biases, lstm forget "
                "bias +1";
    return j;
  }

  static TrainConfig from_json(const nlohmann::json &j) {
    TrainConfig c;
    c.learning_rate = j.at("learning_rate").get<double>();
    c.epochs = j.at("epochs").get<int>();
    c.max_batch = j.at("max_batch").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.dropout = j.at("dropout").get<double>();
    c.schedule = LossSchedule::from_json(j.at("schedule"));
    c.seed = j.at("seed").get<std::uint64_t>();
    c.cell = parse_cell_kind(j.at("cell").get<std::string>());
    c.output_bias = j.at("output_bias").get<bool>();
    c.pool_alpha = j.at("pool_alpha").get<double>();
    const auto split = j.at("split").get<std::vector<double>>();
    if (split.size() != 3)
      throw InvalidConfig("split must hold three ratios");
    c.split = {split[0], split[1], split[2]};
    c.split_seed = j.at("split_seed").get<std::uint64_t>();
    return c;
  }
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;

  friend bool operator==(const EpochRecord &, const EpochRecord &) = default;
};

/// Mean weighted loss and pooled accuracy of a model, inference mode.
inline std::pair<double, double> score_model(const Model &m,
                                             const LabeledSequences &data,
                                             const LossSchedule &schedule,
                                             const PoolingScheme &scheme) {
  if (data.size() == 0)
    return {0.0, 0.0};
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto probs = predict_probabilities(m, data.sequences[i]);
    const auto label = static_cast<std::size_t>(data.labels[i]);
    loss += sequence_loss(probs, label, loss_weights(schedule, probs.size()));
    if (pool_prediction(probs, scheme).label == label)
      ++correct;
  }
  const auto n = static_cast<double>(data.size());
  return {loss / n, static_cast<double>(correct) / n};
}

struct TrainResult {
  Model model; // parameters of the best-validation epoch
  std::vector<EpochRecord> history;
  int best_epoch = 0; // 0 when no epoch ran
};

/// Callback invoked after every epoch (progress reporting).
using EpochObserver = std::function<void(const EpochRecord &)>;

/// SGD over length-bucketed batches. Per batch the gradient is the mean of
/// per-sequence gradients (each a sum over time steps). Returns the model of
/// the epoch with the best validation accuracy, earliest on ties.
inline TrainResult train(const LabeledSequences &train_set,
                         const LabeledSequences &val_set,
                         std::size_t num_classes, const TrainConfig &config,
                         const EpochObserver &observer = {}) {
  config.validate();
  if (train_set.size() == 0 || val_set.size() == 0)
    throw InvalidInput("train: training and validation sets must be non-empty");
  const std::size_t dim = train_set.sequences.front().dim;
  for (const auto *set : {&train_set, &val_set})
    for (std::size_t i = 0; i < set->size(); ++i) {
      set->sequences[i].validate();
      if (set->sequences[i].dim != dim)
        throw DimensionError("train: sequence '" + set->ids[i] + "' has d=" +
                             std::to_string(set->sequences[i].dim) +
                             ", expected " + std::to_string(dim));
      if (set->labels[i] < 0 ||
          static_cast<std::size_t>(set->labels[i]) >= num_classes)
        throw InvalidInput("train: label " + std::to_string(set->labels[i]) +
                           " of '" + set->ids[i] + "' outside [0, " +
                           std::to_string(num_classes) + ")");
    }

  SeededRng rng(config.seed);
  Model model = Model::initialized(config.cell, dim, config.hidden, num_classes,
                                   rng, config.output_bias);
  TrainResult result{model, {}, 0};
  const PoolingScheme scheme = PoolingScheme::weighted(config.effective_pool_alpha());
  double best_acc = -1.0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto batches = bucket_batches(
        std::span<const FeatureSequence>(train_set.sequences), config.max_batch,
        rng);
    double total_loss = 0.0;
    for (const auto &batch : batches) {
      Model grad = model.zeros_like();
      const auto n = train_set.sequences[batch.front()].length();
      const Vector weights = loss_weights(config.schedule, n);
      for (auto idx : batch)
        total_loss += accumulate_sequence_gradient(
            model, train_set.sequences[idx],
            static_cast<std::size_t>(train_set.labels[idx]), weights,
            config.dropout, rng, grad);
      scale_gradients(grad, 1.0 / static_cast<double>(batch.size()));
      sgd_step(model, grad, config.learning_rate);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = total_loss / static_cast<double>(train_set.size());
    rec.train_accuracy = score_model(model, train_set, config.schedule, scheme).second;
    std::tie(rec.val_loss, rec.val_accuracy) =
        score_model(model, val_set, config.schedule, scheme);
    result.history.push_back(rec);
    if (rec.val_accuracy > best_acc) {
      best_acc = rec.val_accuracy;
      result.model = model;
      result.best_epoch = epoch;
    }
    if (observer)
      observer(rec);
  }
  return result;
}

/// `epoch,train_loss,val_accuracy` rows.
inline void write_history_csv(const std::vector<EpochRecord> &history,
                              std::ostream &out) {
  out << "epoch,train_loss,val_accuracy\n";
  const auto old_precision = out.precision(17);
  for (const auto &r : history)
    out << r.epoch << ',' << r.train_loss << ',' << r.val_accuracy << '\n';
  out.precision(old_precision);
}

} // namespace sketchrnn
