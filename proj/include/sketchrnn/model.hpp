// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "features.hpp"
#include "gru.hpp"
#include "lstm.hpp"
#include "numerics.hpp"

namespace sketchrnn {

/// Affine softmax classifier on top of the recurrent state: y_t = W_hy h_t
/// (+ b_y unless disabled).
struct ClassifierHead {
  DenseMatrix w_hy; // K x H
  DenseMatrix b_y;  // K x 1
  bool use_bias = true;

  static ClassifierHead zeros(std::size_t classes, std::size_t hidden,
                              bool use_bias = true) {
    return {DenseMatrix(classes, hidden), DenseMatrix(classes, 1), use_bias};
  }

  static ClassifierHead initialized(std::size_t classes, std::size_t hidden,
                                    SeededRng &rng, bool use_bias = true) {
    return {init_uniform_scaled(classes, hidden, rng), DenseMatrix(classes, 1),
            use_bias};
  }

  std::size_t classes() const noexcept { return w_hy.rows(); }
  std::size_t hidden() const noexcept { return w_hy.cols(); }

  template <class F> void for_each(F &&f) {
    f("W_hy", w_hy);
    f("b_y", b_y);
  }
  template <class F> void for_each(F &&f) const {
    f("W_hy", w_hy);
    f("b_y", b_y);
  }

  friend bool operator==(const ClassifierHead &,
                         const ClassifierHead &) = default;
};

inline Vector head_logits(const ClassifierHead &head,
                          std::span<const double> h) {
  if (!head.use_bias)
    return matvec_affine(head.w_hy, h, Vector(head.classes(), 0.0));
  return matvec_affine(head.w_hy, h, head.b_y.data());
}

/// Recurrent state carried between steps; `c` is only used by the LSTM.
struct RecurrentState {
  Vector h;
  Vector c;
};

template <class Params> struct CellTraits;

template <> struct CellTraits<GruParameters> {
  using Step = GruStep;
  static constexpr std::string_view name = "gru";

  static Step step(const GruParameters &p, std::span<const double> x,
                   const RecurrentState &s) {
    return gru_step(p, x, s.h);
  }
  static void advance(RecurrentState &s, const Step &step) { s.h = step.h; }
};

template <> struct CellTraits<LstmParameters> {
  using Step = LstmStep;
  static constexpr std::string_view name = "lstm";

  static Step step(const LstmParameters &p, std::span<const double> x,
                   const RecurrentState &s) {
    return lstm_step(p, x, s.h, s.c);
  }
  static void advance(RecurrentState &s, const Step &step) {
    s.h = step.h;
    s.c = step.c;
  }
};

inline RecurrentState zero_state(std::size_t hidden) {
  return {Vector(hidden, 0.0), Vector(hidden, 0.0)};
}

/// Per-step record of a full-sequence pass. `masks` is empty when no
/// dropout was applied; otherwise masks[t] already includes the
/// 1/(1 - rate) scaling.
template <class Step> struct ForwardTrace {
  std::vector<Step> steps;
  std::vector<Vector> masks;
  std::vector<Vector> logits;
  std::vector<Vector> probs;

  std::size_t length() const noexcept { return steps.size(); }

  friend bool operator==(const ForwardTrace &, const ForwardTrace &) = default;
};

inline bool operator==(const GruStep &a, const GruStep &b) {
  return a.r == b.r && a.z == b.z && a.candidate == b.candidate && a.h == b.h;
}
inline bool operator==(const LstmStep &a, const LstmStep &b) {
  return a.i == b.i && a.f == b.f && a.o == b.o && a.g == b.g && a.c == b.c &&
         a.tanh_c == b.tanh_c && a.h == b.h;
}

/// Inverted-dropout mask: each unit kept with probability 1 - rate and
/// scaled by 1 / (1 - rate).
inline Vector dropout_mask(std::size_t n, double rate, SeededRng &rng) {
  Vector mask(n);
  const double keep = 1.0 - rate;
  for (double &m : mask)
    m = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
  return mask;
}

/// Runs the cell over X from h_0 = 0. In training mode with rate > 0 a
/// fresh dropout mask is drawn per step and applied to h_t before the head.
template <class Params>
ForwardTrace<typename CellTraits<Params>::Step>
forward_sequence(const Params &cell, const ClassifierHead &head,
                 const FeatureSequence &x, double dropout_rate = 0.0,
                 SeededRng *rng = nullptr, bool training = false) {
  using Traits = CellTraits<Params>;
  if (x.steps.empty())
    throw InvalidInput("forward_sequence: empty sequence");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw InvalidConfig("dropout rate must be in [0, 1), got " +
                        std::to_string(dropout_rate));
  if (x.dim != cell.input_dim())
    throw DimensionError("feature dimension " + std::to_string(x.dim) +
                         " does not match model input " +
                         std::to_string(cell.input_dim()));
  if (head.hidden() != cell.hidden())
    throw ContractError("head expects H=" + std::to_string(head.hidden()) +
                        ", cell has H=" + std::to_string(cell.hidden()));
  const bool use_dropout = training && dropout_rate > 0.0;
  if (use_dropout && rng == nullptr)
    throw ContractError("forward_sequence: dropout requires an rng");

  ForwardTrace<typename Traits::Step> trace;
  const auto n = x.steps.size();
  trace.steps.reserve(n);
  trace.logits.reserve(n);
  trace.probs.reserve(n);
  RecurrentState state = zero_state(cell.hidden());
  for (const auto &xt : x.steps) {
    auto step = Traits::step(cell, xt, state);
    Traits::advance(state, step);
    if (use_dropout) {
      Vector mask = dropout_mask(state.h.size(), dropout_rate, *rng);
      Vector dropped(state.h.size());
      for (std::size_t i = 0; i < dropped.size(); ++i)
        dropped[i] = state.h[i] * mask[i];
      trace.logits.push_back(head_logits(head, dropped));
      trace.masks.push_back(std::move(mask));
    } else {
      trace.logits.push_back(head_logits(head, state.h));
    }
    trace.probs.push_back(softmax(trace.logits.back()));
    trace.steps.push_back(std::move(step));
  }
  return trace;
}

template <class Params> struct Gradients {
  Params cell;
  ClassifierHead head;
};

/// Exact gradient of L = sum_t w_t * -log p_t[label] by backpropagation
/// through time, using the masks recorded in `trace`.
template <class Params>
Gradients<Params>
backward_sequence(const Params &cell, const ClassifierHead &head,
                  const FeatureSequence &x,
                  const ForwardTrace<typename CellTraits<Params>::Step> &trace,
                  std::size_t label, std::span<const double> weights) {
  const auto n = trace.length();
  if (weights.size() != n || x.steps.size() != n)
    throw ContractError("backward_sequence: trace has " + std::to_string(n) +
                        " steps, weights " + std::to_string(weights.size()) +
                        ", inputs " + std::to_string(x.steps.size()));
  if (label >= head.classes())
    throw ContractError("backward_sequence: label " + std::to_string(label) +
                        " out of range for K=" + std::to_string(head.classes()));
  const auto H = cell.hidden();
  Gradients<Params> g{Params::zeros(H, cell.input_dim()),
                      ClassifierHead::zeros(head.classes(), H, head.use_bias)};
  const bool masked = !trace.masks.empty();
  const Vector zeros(H, 0.0);

  Vector dh_next(H, 0.0);
  Vector dc_next(H, 0.0);
  for (std::size_t t = n; t-- > 0;) {
    const auto &step = trace.steps[t];
    // Softmax + cross-entropy: dL/dlogits = w_t (p_t - onehot).
    Vector dlogits = trace.probs[t];
    dlogits[label] -= 1.0;
    for (double &v : dlogits)
      v *= weights[t];

    Vector head_in = step.h;
    if (masked)
      for (std::size_t i = 0; i < H; ++i)
        head_in[i] *= trace.masks[t][i];
    add_outer(g.head.w_hy, dlogits, head_in);
    if (head.use_bias)
      for (std::size_t k = 0; k < dlogits.size(); ++k)
        g.head.b_y(k, 0) += dlogits[k];

    Vector dh(H, 0.0);
    matvec_transposed_accumulate(head.w_hy, dlogits, dh);
    if (masked)
      for (std::size_t i = 0; i < H; ++i)
        dh[i] *= trace.masks[t][i];
    for (std::size_t i = 0; i < H; ++i)
      dh[i] += dh_next[i];

    const std::span<const double> h_prev =
        t > 0 ? std::span<const double>(trace.steps[t - 1].h) : zeros;
    if constexpr (std::is_same_v<Params, GruParameters>) {
      dh_next = gru_step_backward(cell, x.steps[t], h_prev, step, dh, g.cell);
    } else {
      const std::span<const double> c_prev =
          t > 0 ? std::span<const double>(trace.steps[t - 1].c) : zeros;
      Vector dh_prev, dc_prev;
      lstm_step_backward(cell, x.steps[t], h_prev, c_prev, step, dh, dc_next,
                         g.cell, dh_prev, dc_prev);
      dh_next = std::move(dh_prev);
      dc_next = std::move(dc_prev);
    }
  }
  return g;
}

enum class CellKind { gru, lstm };

inline std::string to_string(CellKind k) {
  return k == CellKind::gru ? "gru" : "lstm";
}

inline CellKind parse_cell_kind(const std::string &s) {
  if (s == "gru")
    return CellKind::gru;
  if (s == "lstm")
    return CellKind::lstm;
  throw InvalidConfig("unknown cell kind '" + s + "'");
}

/// A recurrent cell plus its classifier head. Also used as the gradient
/// container (same shapes).
struct Model {
  std::variant<GruParameters, LstmParameters> cell;
  ClassifierHead head;

  static Model initialized(CellKind kind, std::size_t input, std::size_t hidden,
                           std::size_t classes, SeededRng &rng,
                           bool output_bias = true) {
    if (input == 0 || hidden == 0 || classes == 0)
      throw InvalidConfig("model dimensions must be positive");
    Model m;
    if (kind == CellKind::gru)
      m.cell = GruParameters::initialized(hidden, input, rng);
    else
      m.cell = LstmParameters::initialized(hidden, input, rng);
    m.head = ClassifierHead::initialized(classes, hidden, rng, output_bias);
    return m;
  }

  /// Zero tensors of the same shapes.
  Model zeros_like() const {
    Model m = *this;
    m.for_each_tensor([](std::string_view, DenseMatrix &t) { t.fill(0.0); });
    return m;
  }

  CellKind kind() const noexcept {
    return std::holds_alternative<GruParameters>(cell) ? CellKind::gru
                                                       : CellKind::lstm;
  }
  std::size_t input_dim() const {
    return std::visit([](const auto &c) { return c.input_dim(); }, cell);
  }
  std::size_t hidden() const {
    return std::visit([](const auto &c) { return c.hidden(); }, cell);
  }
  std::size_t classes() const noexcept { return head.classes(); }

  template <class F> void for_each_tensor(F &&f) {
    std::visit([&](auto &c) { c.for_each(f); }, cell);
    head.for_each(f);
  }
  template <class F> void for_each_tensor(F &&f) const {
    std::visit([&](const auto &c) { c.for_each(f); }, cell);
    head.for_each(f);
  }

  friend bool operator==(const Model &, const Model &) = default;
};

/// Trainable scalar count: 3H(d+H+1) for the GRU, 4H(d+H+1) for the LSTM,
/// plus K(H+1) for the head (KH without the output bias).
inline std::size_t count_parameters(const Model &m) {
  std::size_t n = 0;
  std::visit(
      [&](const auto &c) {
        c.for_each([&](std::string_view, const DenseMatrix &t) { n += t.size(); });
      },
      m.cell);
  n += m.head.w_hy.size();
  if (m.head.use_bias)
    n += m.head.b_y.size();
  return n;
}

inline std::size_t count_parameters(CellKind kind, std::size_t input,
                                    std::size_t hidden, std::size_t classes,
                                    bool output_bias = true) {
  const std::size_t gates = kind == CellKind::gru ? 3 : 4;
  return gates * hidden * (input + hidden + 1) +
         classes * (hidden + (output_bias ? 1 : 0));
}

/// Inference-mode softmax outputs p_1..p_N.
inline std::vector<Vector> predict_probabilities(const Model &m,
                                                 const FeatureSequence &x) {
  return std::visit(
      [&](const auto &c) { return forward_sequence(c, m.head, x).probs; },
      m.cell);
}

} // namespace sketchrnn
