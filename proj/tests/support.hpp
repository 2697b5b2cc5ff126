// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <sketchrnn.hpp>

namespace sketchrnn::fixtures {

/// Every entry of every tensor uniform in [-scale, scale], biases included.
inline Model random_model(CellKind kind, std::size_t d, std::size_t h,
                          std::size_t k, SeededRng &rng, double scale = 0.8,
                          bool output_bias = true) {
  Model m = Model::initialized(kind, d, h, k, rng, output_bias);
  m.for_each_tensor([&](std::string_view, DenseMatrix &t) {
    for (double &v : t.data())
      v = rng.uniform(-scale, scale);
  });
  return m;
}

inline FeatureSequence random_sequence(std::size_t d, std::size_t n,
                                       SeededRng &rng) {
  FeatureSequence x{d, {}};
  for (std::size_t t = 0; t < n; ++t) {
    Vector v(d);
    for (double &e : v)
      e = rng.uniform(-1.0, 1.0);
    x.steps.push_back(std::move(v));
  }
  return x;
}

/// Weighted loss of `m` on `x`. With dropout, `mask_seed` fixes the masks so
/// that repeated evaluations see identical ones.
inline double model_loss(const Model &m, const FeatureSequence &x,
                         std::size_t label, std::span<const double> w,
                         double dropout, std::uint64_t mask_seed) {
  SeededRng rng(mask_seed);
  return std::visit(
      [&](const auto &cell) {
        const auto trace = forward_sequence(cell, m.head, x, dropout, &rng, true);
        return sequence_loss(trace.probs, label, w);
      },
      m.cell);
}

/// Independent forward pass in extended precision, used as the
/// finite-difference oracle. Its rounding noise sits orders of magnitude
/// below the double pass, so central differences resolve partials near 1e-7.
/// Dropout masks come from the same stream as training mode.
inline long double reference_loss(const Model &m, const FeatureSequence &x,
                                  std::size_t label, std::span<const double> w,
                                  double dropout, std::uint64_t mask_seed) {
  using LD = long double;
  using LVec = std::vector<LD>;
  const std::size_t H = m.hidden(), K = m.classes();
  auto affine = [](const DenseMatrix &wx, const auto &xv, const DenseMatrix &wh,
                   const LVec &h, const DenseMatrix &b) {
    LVec out(wx.rows());
    for (std::size_t i = 0; i < out.size(); ++i) {
      LD acc = b(i, 0);
      for (std::size_t j = 0; j < wx.cols(); ++j)
        acc += static_cast<LD>(wx(i, j)) * xv[j];
      for (std::size_t j = 0; j < wh.cols(); ++j)
        acc += static_cast<LD>(wh(i, j)) * h[j];
      out[i] = acc;
    }
    return out;
  };
  auto sig = [](LD v) { return 1.0L / (1.0L + std::exp(-v)); };

  SeededRng rng(mask_seed);
  LVec h(H, 0.0L), c(H, 0.0L);
  LD loss = 0.0L;
  for (std::size_t t = 0; t < x.steps.size(); ++t) {
    const auto &xt = x.steps[t];
    if (const auto *g = std::get_if<GruParameters>(&m.cell)) {
      LVec r = affine(g->w_xr, xt, g->w_hr, h, g->b_r);
      LVec z = affine(g->w_xz, xt, g->w_hz, h, g->b_z);
      LVec gated(H);
      for (std::size_t i = 0; i < H; ++i) {
        r[i] = sig(r[i]);
        z[i] = sig(z[i]);
        gated[i] = r[i] * h[i];
      }
      const LVec pre = affine(g->w_xh, xt, g->u, gated, g->b_h);
      for (std::size_t i = 0; i < H; ++i)
        h[i] = (1.0L - z[i]) * h[i] + z[i] * std::tanh(pre[i]);
    } else {
      const auto &l = std::get<LstmParameters>(m.cell);
      const LVec gi = affine(l.w_xi, xt, l.w_hi, h, l.b_i);
      const LVec gf = affine(l.w_xf, xt, l.w_hf, h, l.b_f);
      const LVec go = affine(l.w_xo, xt, l.w_ho, h, l.b_o);
      const LVec gg = affine(l.w_xg, xt, l.w_hg, h, l.b_g);
      for (std::size_t i = 0; i < H; ++i) {
        c[i] = sig(gf[i]) * c[i] + sig(gi[i]) * std::tanh(gg[i]);
        h[i] = sig(go[i]) * std::tanh(c[i]);
      }
    }
    LVec hd = h;
    if (dropout > 0.0) {
      const Vector mask = dropout_mask(H, dropout, rng);
      for (std::size_t i = 0; i < H; ++i)
        hd[i] *= mask[i];
    }
    LVec logits(K);
    LD top = -INFINITY;
    for (std::size_t k = 0; k < K; ++k) {
      LD acc = m.head.use_bias ? static_cast<LD>(m.head.b_y(k, 0)) : 0.0L;
      for (std::size_t j = 0; j < H; ++j)
        acc += static_cast<LD>(m.head.w_hy(k, j)) * hd[j];
      logits[k] = acc;
      top = std::max(top, acc);
    }
    LD denom = 0.0L;
    for (LD v : logits)
      denom += std::exp(v - top);
    const LD p = std::exp(logits[label] - top) / denom;
    if (w[t] != 0.0)
      loss += static_cast<LD>(w[t]) * -std::log(std::max(p, static_cast<LD>(kLogClamp)));
  }
  return loss;
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst; // tensor[index] of the largest error
  double worst_analytic = 0.0, worst_numeric = 0.0;
};

/// Relative error with a floor so that two near-zero partials compare by
/// their absolute difference.
inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-7});
}

/// Compares every analytic partial against central differences of the
/// extended-precision reference loss.
inline GradCheck check_gradients(const Model &m, const FeatureSequence &x,
                                 std::size_t label, std::span<const double> w,
                                 double dropout = 0.0,
                                 std::uint64_t mask_seed = 99,
                                 double eps = 1e-5) {
  Model analytic = m.zeros_like();
  SeededRng rng(mask_seed);
  accumulate_sequence_gradient(m, x, label, w, dropout, rng, analytic);

  std::vector<std::pair<std::string, const DenseMatrix *>> grads;
  analytic.for_each_tensor([&](std::string_view name, const DenseMatrix &t) {
    grads.emplace_back(std::string(name), &t);
  });

  GradCheck out;
  Model probe = m;
  std::size_t tensor = 0;
  probe.for_each_tensor([&](std::string_view name, DenseMatrix &t) {
    const auto &g = *grads[tensor++].second;
    if (name == "b_y" && !m.head.use_bias)
      return;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double saved = t.data()[i];
      t.data()[i] = saved + eps;
      const double hi = t.data()[i];
      const long double up = reference_loss(probe, x, label, w, dropout, mask_seed);
      t.data()[i] = saved - eps;
      const double lo = t.data()[i];
      const long double down = reference_loss(probe, x, label, w, dropout, mask_seed);
      t.data()[i] = saved;
      // The actual double step, which differs from 2 eps by rounding.
      const double numeric = static_cast<double>((up - down) / static_cast<long double>(hi - lo));
      const double err = relative_error(g.data()[i], numeric);
      ++out.checked;
      if (err > out.max_rel_error) {
        out.max_rel_error = err;
        out.worst = std::string(name) + "[" + std::to_string(i) + "]";
        out.worst_analytic = g.data()[i];
        out.worst_numeric = numeric;
      }
    }
  });
  return out;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string &name) {
  auto dir = std::filesystem::temp_directory_path() / ("sketchrnn-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Small checkpoint trained on a few synthetic sketches. Cheap enough for
/// unit tests; accuracy is irrelevant.
inline Checkpoint tiny_checkpoint(CellKind cell = CellKind::gru, int epochs = 2) {
  const auto sketches = synth_generate(4, 12, 5);
  FeatureConfig fc;
  const auto seqs = featurize(sketches, fc);
  TrainConfig tc;
  tc.epochs = epochs;
  tc.hidden = 6;
  tc.cell = cell;
  const auto split = split_dataset(labels_of(sketches), tc.split, tc.split_seed);
  auto r = train(seqs.subset(split.train), seqs.subset(split.val), 4, tc);
  return Checkpoint{tc, fc, synth_label_names(4), std::move(r.model), r.history,
                    r.best_epoch};
}

} // namespace sketchrnn::fixtures
