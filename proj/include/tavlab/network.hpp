// Depth-L feed-forward classifier.
//
//   a^(0) = x,  h^(l) = W^(l) a^(l-1) (+ b^(l)),  a^(l) = phi(h^(l)) for l < L,
//   logits = h^(L).
//
// The output layer is always linear: the cross-entropy machinery consumes raw
// logits. Biases are off by default; the norm-bound analysis assumes a
// weights-only parameterization and is not evaluated on biased networks.
//
// Flattened parameter layout (frozen): layers in order 1..L; within a layer
// the weight matrix row-major, then the bias vector when biases are enabled.
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "tavlab/activation.hpp"
#include "tavlab/rng.hpp"
#include "tavlab/tensor.hpp"

namespace tavlab {

struct MlpArchitecture {
  std::vector<std::size_t> layer_dims;  // d_0 .. d_L
  Activation activation = Activation::tanh;
  bool bias_enabled = false;

  std::size_t depth() const { return layer_dims.empty() ? 0 : layer_dims.size() - 1; }
  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t output_dim() const { return layer_dims.back(); }

  std::size_t param_count() const {
    std::size_t p = 0;
    for (std::size_t l = 1; l < layer_dims.size(); ++l) {
      p += layer_dims[l] * layer_dims[l - 1];
      if (bias_enabled) p += layer_dims[l];
    }
    return p;
  }

  void validate() const {
    if (layer_dims.size() < 2)
      throw std::invalid_argument("architecture needs at least one layer");
    for (std::size_t d : layer_dims)
      if (d == 0) throw std::invalid_argument("layer dimensions must be >= 1");
    if (activation == Activation::identity)
      throw std::invalid_argument("identity marks the output layer only");
  }

  bool operator==(const MlpArchitecture&) const = default;
};

struct MlpModel {
  MlpArchitecture arch;
  std::vector<DenseMatrix> weights;          // weights[l-1] is W^(l), d_l x d_{l-1}
  std::vector<std::vector<double>> biases;   // empty unless arch.bias_enabled
};

inline MlpModel zero_model(const MlpArchitecture& arch) {
  arch.validate();
  MlpModel m{arch, {}, {}};
  for (std::size_t l = 1; l < arch.layer_dims.size(); ++l) {
    m.weights.emplace_back(arch.layer_dims[l], arch.layer_dims[l - 1]);
    if (arch.bias_enabled) m.biases.emplace_back(arch.layer_dims[l], 0.0);
  }
  return m;
}

// Gaussian init, entries N(0, (scale/sqrt(fan_in))^2), layer streams disjoint.
inline MlpModel random_init(const MlpArchitecture& arch, std::uint64_t seed,
                            double scale = 1.0) {
  MlpModel m = zero_model(arch);
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    SplitMix64 rng(mix_seed(seed, 0xC0FFEE + l));
    const double sd = scale / std::sqrt(static_cast<double>(m.weights[l].cols));
    for (double& w : m.weights[l].data) w = sd * rng.next_normal();
    if (arch.bias_enabled)
      for (double& b : m.biases[l]) b = sd * rng.next_normal();
  }
  return m;
}

struct ForwardTrace {
  std::vector<std::vector<double>> preacts;  // h^(1) .. h^(L)
  std::vector<std::vector<double>> acts;     // a^(0) .. a^(L); a^(L) = h^(L)
};

// Logits plus the full trace for reuse by the gradient and Hessian passes.
inline std::vector<double> forward(const MlpModel& model,
                                   const std::vector<double>& x,
                                   ForwardTrace* trace = nullptr) {
  const std::size_t depth = model.arch.depth();
  if (x.size() != model.arch.input_dim())
    throw std::invalid_argument("forward: input dimension mismatch");
  if (trace) {
    trace->preacts.assign(depth, {});
    trace->acts.assign(depth + 1, {});
    trace->acts[0] = x;
  }
  std::vector<double> a = x;
  std::vector<double> h;
  for (std::size_t l = 0; l < depth; ++l) {
    matvec(model.weights[l], a, h);
    if (model.arch.bias_enabled)
      for (std::size_t i = 0; i < h.size(); ++i) h[i] += model.biases[l][i];
    if (trace) trace->preacts[l] = h;
    if (l + 1 < depth) {
      a.resize(h.size());
      for (std::size_t i = 0; i < h.size(); ++i)
        a[i] = activation_eval(model.arch.activation, h[i]).value;
    } else {
      a = h;  // linear output layer
    }
    if (trace) trace->acts[l + 1] = a;
  }
  return a;
}

inline ParamVector flatten(const MlpModel& model) {
  ParamVector v;
  v.reserve(model.arch.param_count());
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    v.insert(v.end(), model.weights[l].data.begin(), model.weights[l].data.end());
    if (model.arch.bias_enabled)
      v.insert(v.end(), model.biases[l].begin(), model.biases[l].end());
  }
  return v;
}

inline MlpModel unflatten(const MlpArchitecture& arch, const ParamVector& v) {
  if (v.size() != arch.param_count())
    throw std::invalid_argument("unflatten: expected " +
                                std::to_string(arch.param_count()) +
                                " parameters, got " + std::to_string(v.size()));
  MlpModel m = zero_model(arch);
  std::size_t off = 0;
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    auto& w = m.weights[l];
    std::copy(v.begin() + off, v.begin() + off + w.data.size(), w.data.begin());
    off += w.data.size();
    if (arch.bias_enabled) {
      std::copy(v.begin() + off, v.begin() + off + m.biases[l].size(),
                m.biases[l].begin());
      off += m.biases[l].size();
    }
  }
  return m;
}

// In-place theta += a * v, walking parameters in flatten order.
inline void param_axpy(MlpModel& model, double a, const ParamVector& v) {
  if (v.size() != model.arch.param_count())
    throw std::invalid_argument("param_axpy: length mismatch");
  std::size_t off = 0;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    for (double& w : model.weights[l].data) w += a * v[off++];
    if (model.arch.bias_enabled)
      for (double& b : model.biases[l]) b += a * v[off++];
  }
}

}  // namespace tavlab
