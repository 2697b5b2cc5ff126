// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string_view>

#include "errors.hpp"
#include "numerics.hpp"

namespace sketchrnn {

/// Gated recurrent unit weights for H hidden units over d-dimensional input.
///
///   r_t = sigmoid(W_xr x_t + W_hr h_{t-1} + b_r)
///   z_t = sigmoid(W_xz x_t + W_hz h_{t-1} + b_z)
///   c_t = tanh(W_xh x_t + U (r_t * h_{t-1}) + b_h)
///   h_t = (1 - z_t) * h_{t-1} + z_t * c_t
struct GruParameters {
  DenseMatrix w_xr, w_xz, w_xh; // H x d
  DenseMatrix w_hr, w_hz, u;    // H x H
  DenseMatrix b_r, b_z, b_h;    // H x 1

  static GruParameters zeros(std::size_t hidden, std::size_t input) {
    GruParameters p;
    p.for_each([&](std::string_view name, DenseMatrix &m) {
      const bool is_input = name.starts_with("W_x");
      const bool is_bias = name.starts_with("b_");
      m = DenseMatrix(hidden, is_bias ? 1 : is_input ? input : hidden);
    });
    return p;
  }

  /// Fan-scaled uniform weights, zero biases.
  static GruParameters initialized(std::size_t hidden, std::size_t input,
                                   SeededRng &rng) {
    GruParameters p = zeros(hidden, input);
    p.for_each([&](std::string_view name, DenseMatrix &m) {
      if (!name.starts_with("b_"))
        m = init_uniform_scaled(m.rows(), m.cols(), rng);
    });
    return p;
  }

  std::size_t hidden() const noexcept { return b_r.rows(); }
  std::size_t input_dim() const noexcept { return w_xr.cols(); }

  template <class F> void for_each(F &&f) {
    f("W_xr", w_xr);
    f("W_hr", w_hr);
    f("b_r", b_r);
    f("W_xz", w_xz);
    f("W_hz", w_hz);
    f("b_z", b_z);
    f("W_xh", w_xh);
    f("U", u);
    f("b_h", b_h);
  }
  template <class F> void for_each(F &&f) const {
    const_cast<GruParameters *>(this)->for_each(
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
        throw ContractError("GRU tensor " + std::string(name) + " is " +
                            m.shape() + ", expected " + shape_str(h, cols));
    });
  }

  friend bool operator==(const GruParameters &,
                         const GruParameters &) = default;
};

/// Everything one GRU step computed, kept for backpropagation.
struct GruStep {
  Vector r;         // reset gate
  Vector z;         // update gate
  Vector candidate; // h~_t
  Vector h;
};

inline GruStep gru_step(const GruParameters &p, std::span<const double> x,
                        std::span<const double> h_prev) {
  const auto H = p.hidden();
  if (x.size() != p.input_dim() || h_prev.size() != H)
    throw ContractError("gru_step: x has " + std::to_string(x.size()) +
                        " (expected " + std::to_string(p.input_dim()) +
                        "), h_prev has " + std::to_string(h_prev.size()) +
                        " (expected " + std::to_string(H) + ")");
  GruStep s;
  Vector pre_r = matvec_affine(p.w_xr, x, p.b_r.data());
  matvec_accumulate(p.w_hr, h_prev, pre_r);
  s.r = sigmoid(pre_r);

  Vector pre_z = matvec_affine(p.w_xz, x, p.b_z.data());
  matvec_accumulate(p.w_hz, h_prev, pre_z);
  s.z = sigmoid(pre_z);

  Vector gated(H);
  for (std::size_t i = 0; i < H; ++i)
    gated[i] = s.r[i] * h_prev[i];
  Vector pre_c = matvec_affine(p.w_xh, x, p.b_h.data());
  matvec_accumulate(p.u, gated, pre_c);
  s.candidate = tanh_vec(pre_c);

  s.h.resize(H);
  for (std::size_t i = 0; i < H; ++i)
    s.h[i] = (1.0 - s.z[i]) * h_prev[i] + s.z[i] * s.candidate[i];
  return s;
}

/// Backpropagates dL/dh_t through one step. Accumulates parameter gradients
/// into `grad` and returns dL/dh_{t-1}.
inline Vector gru_step_backward(const GruParameters &p,
                                std::span<const double> x,
                                std::span<const double> h_prev,
                                const GruStep &s, std::span<const double> dh,
                                GruParameters &grad) {
  const auto H = p.hidden();
  Vector dh_prev(H);
  Vector a_z(H), a_c(H), gated(H);
  for (std::size_t i = 0; i < H; ++i) {
    dh_prev[i] = dh[i] * (1.0 - s.z[i]);
    const double dz = dh[i] * (s.candidate[i] - h_prev[i]);
    a_z[i] = dz * s.z[i] * (1.0 - s.z[i]);
    const double dc = dh[i] * s.z[i];
    a_c[i] = dc * (1.0 - s.candidate[i] * s.candidate[i]);
    gated[i] = s.r[i] * h_prev[i];
  }

  add_outer(grad.w_xh, a_c, x);
  add_outer(grad.u, a_c, gated);
  for (std::size_t i = 0; i < H; ++i)
    grad.b_h(i, 0) += a_c[i];

  Vector d_gated(H, 0.0);
  matvec_transposed_accumulate(p.u, a_c, d_gated);
  Vector a_r(H);
  for (std::size_t i = 0; i < H; ++i) {
    dh_prev[i] += d_gated[i] * s.r[i];
    const double dr = d_gated[i] * h_prev[i];
    a_r[i] = dr * s.r[i] * (1.0 - s.r[i]);
  }

  add_outer(grad.w_xz, a_z, x);
  add_outer(grad.w_hz, a_z, h_prev);
  add_outer(grad.w_xr, a_r, x);
  add_outer(grad.w_hr, a_r, h_prev);
  for (std::size_t i = 0; i < H; ++i) {
    grad.b_z(i, 0) += a_z[i];
    grad.b_r(i, 0) += a_r[i];
  }
  matvec_transposed_accumulate(p.w_hz, a_z, dh_prev);
  matvec_transposed_accumulate(p.w_hr, a_r, dh_prev);
  return dh_prev;
}

} // namespace sketchrnn
