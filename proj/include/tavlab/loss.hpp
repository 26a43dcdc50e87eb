// Cross-entropy loss with exact first- and second-order derivatives.
//
// Per sample, with softmax probabilities p and one-hot target e_y:
//   loss     = -log p[y]          (softmax stabilized by max subtraction)
//   d loss/dz = g = p - e_y
//   d2 loss/dz2 = H_logits = diag(p) - p p^T
//
// The gradient is plain reverse mode. The Hessian-vector product propagates
// a directional derivative (R-operator) through both the forward and the
// backward pass, so it carries the Gauss-Newton term J^T H_logits J v and the
// network-curvature term sum_k g_k (d2 f_k) v exactly; finite differences
// exist only as test oracles. Sample contributions are accumulated in index
// order and divided by n at the end.
#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "tavlab/network.hpp"
#include "tavlab/taskgen.hpp"
#include "tavlab/tensor.hpp"

namespace tavlab {

struct SoftmaxState {
  std::vector<double> p;
};

inline SoftmaxState softmax_stable(const std::vector<double>& logits) {
  SoftmaxState s;
  s.p.resize(logits.size());
  double mx = logits[0];
  for (double z : logits) mx = std::max(mx, z);
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    s.p[k] = std::exp(logits[k] - mx);
    sum += s.p[k];
  }
  for (double& v : s.p) v /= sum;
  return s;
}

// diag(p) - p p^T, the exact logit-space Hessian of -log softmax.
inline DenseMatrix logits_hessian(const SoftmaxState& s) {
  const std::size_t k = s.p.size();
  DenseMatrix h(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j)
      h.at(i, j) = (i == j ? s.p[i] : 0.0) - s.p[i] * s.p[j];
  return h;
}

namespace detail {

inline void check_dataset_model(const MlpModel& model, const TaskDataset& data) {
  if (data.size() == 0) throw std::invalid_argument("empty dataset");
  if (data.input_dim != model.arch.input_dim())
    throw std::invalid_argument("dataset input dim does not match the model");
  if (data.num_classes > model.arch.output_dim())
    throw std::invalid_argument("dataset has more classes than model outputs");
}

inline double sample_loss(const std::vector<double>& logits, int label) {
  double mx = logits[0];
  for (double z : logits) mx = std::max(mx, z);
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - mx);
  return std::log(sum) - (logits[label] - mx);
}

}  // namespace detail

// Mean cross-entropy over the dataset.
inline double loss(const MlpModel& model, const TaskDataset& data) {
  detail::check_dataset_model(model, data);
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto logits = forward(model, data.inputs[i]);
    total += detail::sample_loss(logits, data.labels[i]);
  }
  return total / static_cast<double>(data.size());
}

struct LossGrad {
  double loss = 0.0;
  ParamVector grad;
};

// Exact reverse-mode gradient of the mean loss (loss comes for free).
inline LossGrad loss_and_grad(const MlpModel& model, const TaskDataset& data) {
  detail::check_dataset_model(model, data);
  const std::size_t depth = model.arch.depth();
  const bool bias = model.arch.bias_enabled;

  MlpModel acc = zero_model(model.arch);  // gradient accumulator
  double total_loss = 0.0;
  ForwardTrace trace;
  std::vector<double> delta, next;

  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto logits = forward(model, data.inputs[i], &trace);
    total_loss += detail::sample_loss(logits, data.labels[i]);
    const SoftmaxState sm = softmax_stable(logits);

    delta = sm.p;
    delta[data.labels[i]] -= 1.0;  // g = p - e_y
    for (std::size_t lr = depth; lr-- > 0;) {
      const auto& a_prev = trace.acts[lr];
      auto& gw = acc.weights[lr];
      for (std::size_t r = 0; r < gw.rows; ++r) {
        double* row = &gw.data[r * gw.cols];
        const double d = delta[r];
        for (std::size_t c = 0; c < gw.cols; ++c) row[c] += d * a_prev[c];
      }
      if (bias)
        for (std::size_t r = 0; r < delta.size(); ++r) acc.biases[lr][r] += delta[r];
      if (lr > 0) {
        matvec_transposed(model.weights[lr], delta, next);
        const auto& h_prev = trace.preacts[lr - 1];
        delta.resize(next.size());
        for (std::size_t j = 0; j < next.size(); ++j)
          delta[j] = activation_eval(model.arch.activation, h_prev[j]).d1 * next[j];
      }
    }
  }

  const double inv_n = 1.0 / static_cast<double>(data.size());
  LossGrad out;
  out.loss = total_loss * inv_n;
  out.grad = flatten(acc);
  for (double& g : out.grad) g *= inv_n;
  return out;
}

inline ParamVector grad(const MlpModel& model, const TaskDataset& data) {
  return loss_and_grad(model, data).grad;
}

// Exact Hessian-vector product via second-order propagation. v is consumed in
// flatten order; the result is the directional derivative of grad() along v.
inline ParamVector hvp(const MlpModel& model, const TaskDataset& data,
                       const ParamVector& v) {
  detail::check_dataset_model(model, data);
  if (v.size() != model.arch.param_count())
    throw std::invalid_argument("hvp: direction length mismatch");
  const std::size_t depth = model.arch.depth();
  const bool bias = model.arch.bias_enabled;
  const MlpModel dir = unflatten(model.arch, v);  // V^(l) blocks of v
  MlpModel acc = zero_model(model.arch);          // R(grad) accumulator

  std::vector<std::vector<double>> h(depth), a(depth + 1);
  std::vector<std::vector<double>> rh(depth), ra(depth + 1);
  std::vector<double> tmp, delta, rdelta, t, rt;

  for (std::size_t i = 0; i < data.size(); ++i) {
    // Forward pass with directional derivatives R(.) along v.
    a[0] = data.inputs[i];
    ra[0].assign(a[0].size(), 0.0);
    for (std::size_t l = 0; l < depth; ++l) {
      matvec(model.weights[l], a[l], h[l]);
      matvec(model.weights[l], ra[l], rh[l]);
      matvec(dir.weights[l], a[l], tmp);
      for (std::size_t j = 0; j < tmp.size(); ++j) rh[l][j] += tmp[j];
      if (bias)
        for (std::size_t j = 0; j < h[l].size(); ++j) {
          h[l][j] += model.biases[l][j];
          rh[l][j] += dir.biases[l][j];
        }
      if (l + 1 < depth) {
        a[l + 1].resize(h[l].size());
        ra[l + 1].resize(h[l].size());
        for (std::size_t j = 0; j < h[l].size(); ++j) {
          const auto av = activation_eval(model.arch.activation, h[l][j]);
          a[l + 1][j] = av.value;
          ra[l + 1][j] = av.d1 * rh[l][j];
        }
      } else {
        a[l + 1] = h[l];
        ra[l + 1] = rh[l];
      }
    }

    const SoftmaxState sm = softmax_stable(a[depth]);
    delta = sm.p;
    delta[data.labels[i]] -= 1.0;
    // R(g) = H_logits R(z) = p .* Rz - p (p . Rz)
    double p_dot_rz = 0.0;
    for (std::size_t k = 0; k < sm.p.size(); ++k) p_dot_rz += sm.p[k] * ra[depth][k];
    rdelta.resize(sm.p.size());
    for (std::size_t k = 0; k < sm.p.size(); ++k)
      rdelta[k] = sm.p[k] * ra[depth][k] - sm.p[k] * p_dot_rz;

    // Backward pass, propagating R through it.
    for (std::size_t lr = depth; lr-- > 0;) {
      auto& gw = acc.weights[lr];
      for (std::size_t r = 0; r < gw.rows; ++r) {
        double* row = &gw.data[r * gw.cols];
        const double d = delta[r];
        const double rd = rdelta[r];
        const auto& a_prev = a[lr];
        const auto& ra_prev = ra[lr];
        for (std::size_t c = 0; c < gw.cols; ++c)
          row[c] += rd * a_prev[c] + d * ra_prev[c];
      }
      if (bias)
        for (std::size_t r = 0; r < rdelta.size(); ++r) acc.biases[lr][r] += rdelta[r];
      if (lr > 0) {
        matvec_transposed(model.weights[lr], delta, t);
        matvec_transposed(model.weights[lr], rdelta, rt);
        matvec_transposed(dir.weights[lr], delta, tmp);
        for (std::size_t j = 0; j < rt.size(); ++j) rt[j] += tmp[j];
        const auto& h_prev = h[lr - 1];
        const auto& rh_prev = rh[lr - 1];
        delta.resize(t.size());
        rdelta.resize(t.size());
        for (std::size_t j = 0; j < t.size(); ++j) {
          const auto av = activation_eval(model.arch.activation, h_prev[j]);
          rdelta[j] = av.d2 * rh_prev[j] * t[j] + av.d1 * rt[j];
          delta[j] = av.d1 * t[j];
        }
      }
    }
  }

  const double inv_n = 1.0 / static_cast<double>(data.size());
  ParamVector out = flatten(acc);
  for (double& g : out) g *= inv_n;
  return out;
}

struct FullHessian {
  DenseMatrix matrix;      // symmetrized, (H + H^T)/2
  double raw_asymmetry;    // ||H - H^T||_2 / ||H||_2 before symmetrization
};

// Dense Hessian assembled column-by-column from hvp on basis vectors.
inline FullHessian full_hessian(const MlpModel& model, const TaskDataset& data,
                                std::size_t cap = 5000) {
  const std::size_t p = model.arch.param_count();
  if (p > cap) throw std::invalid_argument("hessian too large");
  DenseMatrix h(p, p);
  ParamVector e(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    e[j] = 1.0;
    const ParamVector col = hvp(model, data, e);
    e[j] = 0.0;
    for (std::size_t i = 0; i < p; ++i) h.at(i, j) = col[i];
  }
  DenseMatrix skew(p, p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j)
      skew.at(i, j) = h.at(i, j) - h.at(j, i);
  const double hn = spectral_norm(h);
  const double asym = hn == 0.0 ? 0.0 : spectral_norm(skew) / hn;
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i + 1; j < p; ++j) {
      const double s = 0.5 * (h.at(i, j) + h.at(j, i));
      h.at(i, j) = s;
      h.at(j, i) = s;
    }
  return {std::move(h), asym};
}

// ||Hessian||_2 without densifying: power iteration on the hvp operator.
inline double hessian_spectral_norm(const MlpModel& model, const TaskDataset& data,
                                    double tol = 1e-9, std::size_t max_iter = 5000,
                                    std::uint64_t seed = 11) {
  const std::size_t p = model.arch.param_count();
  SplitMix64 rng(mix_seed(seed, 0x4E55));
  ParamVector v(p);
  for (double& x : v) x = rng.next_normal();
  double vn = norm2(v);
  for (double& x : v) x /= vn;
  double sigma = 0.0;
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    ParamVector w = hvp(model, data, v);
    const double wn = norm2(w);
    if (wn == 0.0) return 0.0;
    const double prev = sigma;
    sigma = wn;  // |Rayleigh| limit for symmetric operators
    for (std::size_t j = 0; j < p; ++j) v[j] = w[j] / wn;
    if (iter > 0 && std::abs(sigma - prev) <= tol * sigma) return sigma;
  }
  throw SpectralNormError(sigma);
}

enum class FdMode { grad, hvp };

struct FdReport {
  FdMode mode = FdMode::grad;
  double step = 0.0;
  double max_rel_error = 0.0;
  std::size_t worst_coordinate = 0;
  // relu only: count of activation sign flips between the +/- evaluations;
  // a kink inside the stencil makes the central difference unreliable there
  std::size_t kink_crossings = 0;
};

namespace detail {

inline std::size_t count_sign_flips(const MlpModel& a, const MlpModel& b,
                                    const TaskDataset& data) {
  std::size_t flips = 0;
  const std::size_t hidden = a.arch.depth() - 1;  // output layer has no kink
  ForwardTrace ta, tb;
  for (std::size_t i = 0; i < data.size(); ++i) {
    forward(a, data.inputs[i], &ta);
    forward(b, data.inputs[i], &tb);
    for (std::size_t l = 0; l < hidden; ++l)
      for (std::size_t j = 0; j < ta.preacts[l].size(); ++j)
        if ((ta.preacts[l][j] > 0.0) != (tb.preacts[l][j] > 0.0)) ++flips;
  }
  return flips;
}

}  // namespace detail

// Central-difference check of grad() or hvp(); the oracle side of the pair.
// Errors are per coordinate, relative to the largest analytic coordinate.
inline FdReport fd_check(const MlpModel& model, const TaskDataset& data,
                         FdMode mode, std::uint64_t seed = 3) {
  FdReport report;
  report.mode = mode;
  const ParamVector theta = flatten(model);
  const double eps = std::max(1e-5, 1e-5 * norm_inf(theta));
  report.step = eps;
  const bool is_relu = model.arch.activation == Activation::relu;

  ParamVector analytic, fd(theta.size());
  if (mode == FdMode::grad) {
    analytic = grad(model, data);
    ParamVector perturbed = theta;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      perturbed[i] = theta[i] + eps;
      const MlpModel plus = unflatten(model.arch, perturbed);
      perturbed[i] = theta[i] - eps;
      const MlpModel minus = unflatten(model.arch, perturbed);
      perturbed[i] = theta[i];
      fd[i] = (loss(plus, data) - loss(minus, data)) / (2.0 * eps);
      if (is_relu) report.kink_crossings += detail::count_sign_flips(plus, minus, data);
    }
  } else {
    SplitMix64 rng(mix_seed(seed, 0xD1FF));
    ParamVector v(theta.size());
    for (double& x : v) x = rng.next_normal();
    const double vn = norm2(v);
    for (double& x : v) x /= vn;
    analytic = hvp(model, data, v);
    ParamVector shifted = theta;
    axpy(eps, v, shifted);
    const MlpModel plus = unflatten(model.arch, shifted);
    shifted = theta;
    axpy(-eps, v, shifted);
    const MlpModel minus = unflatten(model.arch, shifted);
    const ParamVector gp = grad(plus, data);
    const ParamVector gm = grad(minus, data);
    for (std::size_t i = 0; i < theta.size(); ++i)
      fd[i] = (gp[i] - gm[i]) / (2.0 * eps);
    if (is_relu) report.kink_crossings += detail::count_sign_flips(plus, minus, data);
  }

  const double scale = std::max(norm_inf(analytic), 1e-12);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double err = std::abs(fd[i] - analytic[i]) / scale;
    if (err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_coordinate = i;
    }
  }
  return report;
}

}  // namespace tavlab
