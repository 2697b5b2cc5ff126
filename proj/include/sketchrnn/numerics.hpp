// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace sketchrnn {

using Vector = std::vector<double>;

inline std::string shape_str(std::size_t rows, std::size_t cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

/// Row-major dense matrix of doubles. Biases are stored as n x 1 matrices so
/// every trainable tensor shares one type.
class DenseMatrix {
public:
  DenseMatrix() = default;

  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
      throw ContractError("DenseMatrix: data length " +
                          std::to_string(data_.size()) + " does not match " +
                          shape_str(rows_, cols_));
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
      m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::string shape() const { return shape_str(rows_, cols_); }

  double &operator()(std::size_t r, std::size_t c) noexcept {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const noexcept {
    return data_[r * cols_ + c];
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<const double> row(std::size_t r) const noexcept {
    return std::span<const double>(data_).subspan(r * cols_, cols_);
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const DenseMatrix &o) const noexcept {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

  friend bool operator==(const DenseMatrix &, const DenseMatrix &) = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

inline DenseMatrix matmul(const DenseMatrix &a, const DenseMatrix &b) {
  if (a.cols() != b.rows())
    throw ContractError("matmul: " + a.shape() + " * " + b.shape());
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j)
        out(i, j) += aik * b(k, j);
    }
  return out;
}

/// out[i] = sum_j W[i,j] x[j] + b[i], summed left to right.
inline Vector matvec_affine(const DenseMatrix &w, std::span<const double> x,
                            std::span<const double> b) {
  if (w.cols() != x.size() || w.rows() != b.size())
    throw ContractError("matvec_affine: W is " + w.shape() + ", x has " +
                        std::to_string(x.size()) + ", b has " +
                        std::to_string(b.size()));
  Vector out(w.rows());
  for (std::size_t i = 0; i < w.rows(); ++i) {
    const auto row = w.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j)
      acc += row[j] * x[j];
    out[i] = acc + b[i];
  }
  return out;
}

/// out += W x
inline void matvec_accumulate(const DenseMatrix &w, std::span<const double> x,
                              std::span<double> out) {
  if (w.cols() != x.size() || w.rows() != out.size())
    throw ContractError("matvec_accumulate: W is " + w.shape() + ", x has " +
                        std::to_string(x.size()) + ", out has " +
                        std::to_string(out.size()));
  for (std::size_t i = 0; i < w.rows(); ++i) {
    const auto row = w.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j)
      acc += row[j] * x[j];
    out[i] += acc;
  }
}

/// out += W^T v
inline void matvec_transposed_accumulate(const DenseMatrix &w,
                                         std::span<const double> v,
                                         std::span<double> out) {
  if (w.rows() != v.size() || w.cols() != out.size())
    throw ContractError("matvec_transposed_accumulate: W is " + w.shape() +
                        ", v has " + std::to_string(v.size()) +
                        ", out has " + std::to_string(out.size()));
  for (std::size_t i = 0; i < w.rows(); ++i) {
    const double vi = v[i];
    if (vi == 0.0)
      continue;
    const auto row = w.row(i);
    for (std::size_t j = 0; j < row.size(); ++j)
      out[j] += row[j] * vi;
  }
}

/// M += a b^T. Zero entries of `b` are skipped (sparse occupancy inputs).
inline void add_outer(DenseMatrix &m, std::span<const double> a,
                      std::span<const double> b) {
  if (m.rows() != a.size() || m.cols() != b.size())
    throw ContractError("add_outer: M is " + m.shape() + ", a has " +
                        std::to_string(a.size()) + ", b has " +
                        std::to_string(b.size()));
  auto data = m.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double ai = a[i];
    if (ai == 0.0)
      continue;
    double *row = data.data() + i * b.size();
    for (std::size_t j = 0; j < b.size(); ++j)
      row[j] += ai * b[j];
  }
}

inline double sigmoid(double x) noexcept {
  if (x >= 0.0)
    return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Vector sigmoid(std::span<const double> v) {
  Vector out(v.size());
  std::transform(v.begin(), v.end(), out.begin(),
                 [](double x) { return sigmoid(x); });
  return out;
}

inline Vector tanh_vec(std::span<const double> v) {
  Vector out(v.size());
  std::transform(v.begin(), v.end(), out.begin(),
                 [](double x) { return std::tanh(x); });
  return out;
}

/// Max-subtracted softmax.
inline Vector softmax(std::span<const double> v) {
  if (v.empty())
    return {};
  const double m = *std::max_element(v.begin(), v.end());
  Vector out(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - m);
    total += out[i];
  }
  for (double &p : out)
    p /= total;
  return out;
}

/// Deterministic random stream. The engine's output sequence is fixed by the
/// C++ standard; all conversions to reals and indices are done here rather
/// than through std:: distributions, whose results vary across standard
/// library implementations.
class SeededRng {
public:
  explicit SeededRng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0)
      u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  /// Unbiased integer in [0, n).
  std::size_t index(std::size_t n) {
    if (n <= 1)
      return 0;
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t r = next_u64();
    while (r >= limit)
      r = next_u64();
    return static_cast<std::size_t>(r % bound);
  }

  /// Inclusive integer range.
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(index(static_cast<std::size_t>(hi - lo + 1)));
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Fisher-Yates.
  template <class T> void shuffle(std::vector<T> &items) {
    for (std::size_t i = items.size(); i > 1; --i)
      std::swap(items[i - 1], items[index(i)]);
  }

private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Entries i.i.d. uniform in +-sqrt(6 / (rows + cols)), drawn row-major.
inline DenseMatrix init_uniform_scaled(std::size_t rows, std::size_t cols,
                                       SeededRng &rng) {
  if (rows == 0 || cols == 0)
    throw ContractError("init_uniform_scaled: shape " + shape_str(rows, cols));
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  DenseMatrix m(rows, cols);
  for (double &v : m.data())
    v = rng.uniform(-limit, limit);
  return m;
}

} // namespace sketchrnn
