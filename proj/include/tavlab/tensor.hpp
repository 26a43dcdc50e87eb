// Minimal dense float64 linear algebra: parameter vectors, row-major
// matrices, norms, inner products and a power-iteration spectral norm.
//
// Summation order is fixed (ascending index) everywhere so results are
// bit-reproducible; compensated summation exists only in the test oracles.
#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "tavlab/rng.hpp"

namespace tavlab {

// Flat float64 parameter block; the common currency between the network,
// the trainer and the task-vector algebra.
using ParamVector = std::vector<double>;

struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

inline bool all_finite(const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

inline void require_finite(const std::vector<double>& v) {
  if (!all_finite(v)) throw std::invalid_argument("non-finite vector");
}

inline void require_same_length(const ParamVector& a, const ParamVector& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("length mismatch: " + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()));
}

inline double dot(const ParamVector& a, const ParamVector& b) {
  require_same_length(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const ParamVector& v) {
  require_finite(v);
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double norm_inf(const ParamVector& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// cos(v, w) clamped to [-1, 1] against rounding; errors on zero input.
inline double cosine(const ParamVector& v, const ParamVector& w) {
  const double nv = norm2(v);
  const double nw = norm2(w);
  if (nv == 0.0 || nw == 0.0) throw std::invalid_argument("undefined cosine");
  const double c = dot(v, w) / (nv * nw);
  return std::min(1.0, std::max(-1.0, c));
}

// y += a * x
inline void axpy(double a, const ParamVector& x, ParamVector& y) {
  require_same_length(x, y);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline ParamVector scaled(const ParamVector& x, double a) {
  ParamVector y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = a * x[i];
  return y;
}

inline ParamVector subtract(const ParamVector& a, const ParamVector& b) {
  require_same_length(a, b);
  ParamVector d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return d;
}

// out = M x
inline void matvec(const DenseMatrix& m, const std::vector<double>& x,
                   std::vector<double>& out) {
  if (x.size() != m.cols) throw std::invalid_argument("matvec shape mismatch");
  out.assign(m.rows, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double* row = &m.data[i * m.cols];
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) s += row[j] * x[j];
    out[i] = s;
  }
}

// out = M^T x
inline void matvec_transposed(const DenseMatrix& m, const std::vector<double>& x,
                              std::vector<double>& out) {
  if (x.size() != m.rows)
    throw std::invalid_argument("matvec_transposed shape mismatch");
  out.assign(m.cols, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double* row = &m.data[i * m.cols];
    const double xi = x[i];
    for (std::size_t j = 0; j < m.cols; ++j) out[j] += row[j] * xi;
  }
}

struct SpectralNormError : std::runtime_error {
  double last_estimate;
  explicit SpectralNormError(double estimate)
      : std::runtime_error("power iteration did not converge; last estimate " +
                           std::to_string(estimate)),
        last_estimate(estimate) {}
};

// Largest singular value via power iteration on M^T M (alternating products,
// M^T M is never formed). Seeded start vector, relative tolerance on the
// singular-value estimate.
inline double spectral_norm(const DenseMatrix& m, double tol = 1e-10,
                            std::size_t max_iter = 5000,
                            std::uint64_t seed = 7) {
  if (tol <= 0.0) throw std::invalid_argument("spectral_norm: tol must be > 0");
  if (m.rows == 0 || m.cols == 0) return 0.0;
  require_finite(m.data);

  SplitMix64 rng(mix_seed(seed, 0xA11CE));
  std::vector<double> v(m.cols);
  for (double& x : v) x = rng.next_normal();
  double vn = 0.0;
  for (double x : v) vn += x * x;
  vn = std::sqrt(vn);
  if (vn == 0.0) v[0] = 1.0, vn = 1.0;
  for (double& x : v) x /= vn;

  std::vector<double> u, w;
  double sigma = 0.0;
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    matvec(m, v, u);
    double un = 0.0;
    for (double x : u) un += x * x;
    un = std::sqrt(un);
    if (un == 0.0) return 0.0;  // v in the null space and M v = 0 exactly
    const double prev = sigma;
    sigma = un;
    matvec_transposed(m, u, w);
    double wn = 0.0;
    for (double x : w) wn += x * x;
    wn = std::sqrt(wn);
    if (wn == 0.0) return sigma;
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = w[j] / wn;
    if (iter > 0 && std::abs(sigma - prev) <= tol * sigma) return sigma;
  }
  throw SpectralNormError(sigma);
}

}  // namespace tavlab
