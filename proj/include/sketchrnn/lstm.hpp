// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <span>
#include <string_view>

#include "errors.hpp"
#include "numerics.hpp"

namespace sketchrnn {

/// Standard LSTM (no peepholes), used as the ablation alternative to the GRU.
///
///   i, f, o = sigmoid(W_x* x_t + W_h* h_{t-1} + b_*)
///   g       = tanh(W_xg x_t + W_hg h_{t-1} + b_g)
///   c_t     = f * c_{t-1} + i * g
///   h_t     = o * tanh(c_t)
struct LstmParameters {
  DenseMatrix w_xi, w_xf, w_xo, w_xg; // H x d
  DenseMatrix w_hi, w_hf, w_ho, w_hg; // H x H
  DenseMatrix b_i, b_f, b_o, b_g;     // H x 1

  static constexpr double kForgetBiasInit = 1.0;

  static LstmParameters zeros(std::size_t hidden, std::size_t input) {
    LstmParameters p;
    p.for_each([&](std::string_view name, DenseMatrix &m) {
      const bool is_input = name.starts_with("W_x");
      const bool is_bias = name.starts_with("b_");
      m = DenseMatrix(hidden, is_bias ? 1 : is_input ? input : hidden);
    });
    return p;
  }

  static LstmParameters initialized(std::size_t hidden, std::size_t input,
                                    SeededRng &rng) {
    LstmParameters p = zeros(hidden, input);
    p.for_each([&](std::string_view name, DenseMatrix &m) {
      if (!name.starts_with("b_"))
        m = init_uniform_scaled(m.rows(), m.cols(), rng);
    });
    p.b_f.fill(kForgetBiasInit);
    return p;
  }

  std::size_t hidden() const noexcept { return b_i.rows(); }
  std::size_t input_dim() const noexcept { return w_xi.cols(); }

  template <class F> void for_each(F &&f) {
    f("W_xi", w_xi);
    f("W_hi", w_hi);
    f("b_i", b_i);
    f("W_xf", w_xf);
    f("W_hf", w_hf);
    f("b_f", b_f);
    f("W_xo", w_xo);
    f("W_ho", w_ho);
    f("b_o", b_o);
    f("W_xg", w_xg);
    f("W_hg", w_hg);
    f("b_g", b_g);
  }
  template <class F> void for_each(F &&f) const {
    const_cast<LstmParameters *>(this)->for_each(
        [&](std::string_view name, DenseMatrix &m) {
          f(name, static_cast<const DenseMatrix &>(m));
        });
  }

  void validate() const {
    const auto h = hidden(), d = input_dim();
    for_each([&](std::string_view name, const DenseMatrix &m) {
      const std::size_t cols = name.starts_with("b_")    ? 1
                               : name.starts_with("W_x") ? d
                                                         : h;
      if (m.rows() != h || m.cols() != cols)
        throw ContractError("LSTM tensor " + std::string(name) + " is " +
                            m.shape() + ", expected " + shape_str(h, cols));
    });
  }

  friend bool operator==(const LstmParameters &,
                         const LstmParameters &) = default;
};

struct LstmStep {
  Vector i, f, o, g;
  Vector c;
  Vector tanh_c;
  Vector h;
};

inline LstmStep lstm_step(const LstmParameters &p, std::span<const double> x,
                          std::span<const double> h_prev,
                          std::span<const double> c_prev) {
  const auto H = p.hidden();
  if (x.size() != p.input_dim() || h_prev.size() != H || c_prev.size() != H)
    throw ContractError("lstm_step: x has " + std::to_string(x.size()) +
                        " (expected " + std::to_string(p.input_dim()) +
                        "), state has " + std::to_string(h_prev.size()) + "/" +
                        std::to_string(c_prev.size()) + " (expected " +
                        std::to_string(H) + ")");
  auto gate = [&](const DenseMatrix &wx, const DenseMatrix &wh,
                  const DenseMatrix &b) {
    Vector pre = matvec_affine(wx, x, b.data());
    matvec_accumulate(wh, h_prev, pre);
    return pre;
  };
  LstmStep s;
  s.i = sigmoid(gate(p.w_xi, p.w_hi, p.b_i));
  s.f = sigmoid(gate(p.w_xf, p.w_hf, p.b_f));
  s.o = sigmoid(gate(p.w_xo, p.w_ho, p.b_o));
  s.g = tanh_vec(gate(p.w_xg, p.w_hg, p.b_g));
  s.c.resize(H);
  s.h.resize(H);
  s.tanh_c.resize(H);
  for (std::size_t k = 0; k < H; ++k) {
    s.c[k] = s.f[k] * c_prev[k] + s.i[k] * s.g[k];
    s.tanh_c[k] = std::tanh(s.c[k]);
    s.h[k] = s.o[k] * s.tanh_c[k];
  }
  return s;
}

/// Backpropagates (dL/dh_t, dL/dc_t) through one step. Accumulates parameter
/// gradients and writes dL/dh_{t-1}, dL/dc_{t-1}.
inline void lstm_step_backward(const LstmParameters &p,
                               std::span<const double> x,
                               std::span<const double> h_prev,
                               std::span<const double> c_prev,
                               const LstmStep &s, std::span<const double> dh,
                               std::span<const double> dc, LstmParameters &grad,
                               Vector &dh_prev, Vector &dc_prev) {
  const auto H = p.hidden();
  Vector a_i(H), a_f(H), a_o(H), a_g(H);
  dc_prev.assign(H, 0.0);
  for (std::size_t k = 0; k < H; ++k) {
    const double d_o = dh[k] * s.tanh_c[k];
    const double dct =
        dc[k] + dh[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
    const double d_f = dct * c_prev[k];
    const double d_i = dct * s.g[k];
    const double d_g = dct * s.i[k];
    dc_prev[k] = dct * s.f[k];
    a_i[k] = d_i * s.i[k] * (1.0 - s.i[k]);
    a_f[k] = d_f * s.f[k] * (1.0 - s.f[k]);
    a_o[k] = d_o * s.o[k] * (1.0 - s.o[k]);
    a_g[k] = d_g * (1.0 - s.g[k] * s.g[k]);
  }
  dh_prev.assign(H, 0.0);
  auto apply = [&](const Vector &a, DenseMatrix &gx, DenseMatrix &gh,
                   DenseMatrix &gb, const DenseMatrix &wh) {
    add_outer(gx, a, x);
    add_outer(gh, a, h_prev);
    for (std::size_t k = 0; k < H; ++k)
      gb(k, 0) += a[k];
    matvec_transposed_accumulate(wh, a, dh_prev);
  };
  apply(a_i, grad.w_xi, grad.w_hi, grad.b_i, p.w_hi);
  apply(a_f, grad.w_xf, grad.w_hf, grad.b_f, p.w_hf);
  apply(a_o, grad.w_xo, grad.w_ho, grad.b_o, p.w_ho);
  apply(a_g, grad.w_xg, grad.w_hg, grad.b_g, p.w_hg);
}

} // namespace sketchrnn
