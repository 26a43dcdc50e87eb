// Deterministic synthetic classification tasks.
//
// Generation algorithm (fixed, version 1):
//   - class directions u_k: d0 standard normals from the task stream,
//     normalized to unit length; cluster mean_k = separation * u_k
//   - sample i gets label i mod K (balanced within one sample) and
//     x_i = mean_{label_i} + standard normal noise
//   - if max_i ||x_i|| exceeds the requested bound, every sample is scaled
//     by bound/max once, making the recorded bound tight
//   - m_x_bound is the measured max norm after any rescale
//
// A task family draws per-task streams from disjoint seeds. With
// relatedness rho > 0 the class directions are blended with a family-wide
// prototype, rho * proto_k + (1 - rho) * own_k (renormalized), so tasks share
// geometry the way finetuning tasks share a pretraining domain. The prototype
// itself doubles as the pretraining task.
#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tavlab/rng.hpp"
#include "tavlab/tensor.hpp"

namespace tavlab {

constexpr int kTaskGeneratorVersion = 1;

struct TaskDataset {
  std::string task_id;
  std::uint64_t seed = 0;
  std::size_t input_dim = 0;
  std::size_t num_classes = 0;
  std::vector<std::vector<double>> inputs;
  std::vector<int> labels;
  double m_x_bound = 0.0;
  bool degenerate = false;  // set when some class has no sample

  std::size_t size() const { return inputs.size(); }
};

struct TaskFamilySpec {
  std::size_t count = 1;        // T
  std::size_t samples = 100;    // n_t
  std::size_t input_dim = 8;    // d0
  std::size_t classes = 3;      // K
  double m_x = 1.0;
  double separation = 3.0;
  double relatedness = 0.0;     // rho in [0, 1]
};

namespace detail {

inline std::vector<std::vector<double>> unit_directions(SplitMix64& rng,
                                                        std::size_t count,
                                                        std::size_t dim) {
  std::vector<std::vector<double>> dirs(count, std::vector<double>(dim));
  for (auto& d : dirs) {
    double n = 0.0;
    for (double& x : d) {
      x = rng.next_normal();
      n += x * x;
    }
    n = std::sqrt(n);
    if (n == 0.0) {
      d[0] = 1.0;
    } else {
      for (double& x : d) x /= n;
    }
  }
  return dirs;
}

inline TaskDataset sample_task(const std::string& task_id, std::uint64_t seed,
                               std::size_t n, std::size_t d0, std::size_t classes,
                               double m_x, double separation,
                               const std::vector<std::vector<double>>& class_dirs) {
  TaskDataset ds;
  ds.task_id = task_id;
  ds.seed = seed;
  ds.input_dim = d0;
  ds.num_classes = classes;
  ds.inputs.reserve(n);
  ds.labels.reserve(n);
  SplitMix64 noise(mix_seed(seed, 0x5A11));
  double max_norm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % classes);
    std::vector<double> x(d0);
    double norm_sq = 0.0;
    for (std::size_t j = 0; j < d0; ++j) {
      x[j] = separation * class_dirs[label][j] + noise.next_normal();
      norm_sq += x[j] * x[j];
    }
    max_norm = std::max(max_norm, std::sqrt(norm_sq));
    ds.inputs.push_back(std::move(x));
    ds.labels.push_back(label);
  }
  if (max_norm > m_x) {
    const double factor = m_x / max_norm;
    max_norm = 0.0;
    for (auto& x : ds.inputs) {
      double norm_sq = 0.0;
      for (double& v : x) {
        v *= factor;
        norm_sq += v * v;
      }
      max_norm = std::max(max_norm, std::sqrt(norm_sq));
    }
  }
  ds.m_x_bound = max_norm;
  ds.degenerate = n < classes;
  return ds;
}

}  // namespace detail

inline TaskDataset make_task(std::uint64_t seed, std::size_t n, std::size_t d0,
                             std::size_t classes, double m_x, double separation) {
  if (classes < 2) throw std::invalid_argument("make_task: need at least 2 classes");
  if (n == 0 || d0 == 0) throw std::invalid_argument("make_task: empty shape");
  if (separation < 0.0) throw std::invalid_argument("make_task: separation < 0");
  if (m_x <= 0.0) throw std::invalid_argument("make_task: m_x must be > 0");
  SplitMix64 mean_rng(mix_seed(seed, 0x0D1));
  const auto dirs = detail::unit_directions(mean_rng, classes, d0);
  return detail::sample_task("task-" + std::to_string(seed), seed, n, d0, classes,
                             m_x, separation, dirs);
}

// T tasks on disjoint seed streams. With spec.relatedness == 0 task t is
// exactly make_task(mix_seed(seed, t), ...), so a single-task family matches
// the standalone generator.
inline std::vector<TaskDataset> make_task_family(std::uint64_t seed,
                                                 const TaskFamilySpec& spec) {
  if (spec.count == 0) throw std::invalid_argument("make_task_family: T must be >= 1");
  if (spec.relatedness < 0.0 || spec.relatedness > 1.0)
    throw std::invalid_argument("make_task_family: relatedness outside [0, 1]");
  std::vector<TaskDataset> tasks;
  tasks.reserve(spec.count);
  if (spec.relatedness == 0.0) {
    for (std::size_t t = 0; t < spec.count; ++t)
      tasks.push_back(make_task(mix_seed(seed, t), spec.samples, spec.input_dim,
                                spec.classes, spec.m_x, spec.separation));
    for (std::size_t t = 0; t < spec.count; ++t)
      tasks[t].task_id = "task-" + std::to_string(t);
    return tasks;
  }
  SplitMix64 proto_rng(mix_seed(seed, 0xB00));
  const auto proto = detail::unit_directions(proto_rng, spec.classes, spec.input_dim);
  for (std::size_t t = 0; t < spec.count; ++t) {
    const std::uint64_t task_seed = mix_seed(seed, t + 1);
    SplitMix64 own_rng(mix_seed(task_seed, 0x0D1));
    auto own = detail::unit_directions(own_rng, spec.classes, spec.input_dim);
    for (std::size_t k = 0; k < spec.classes; ++k) {
      double n = 0.0;
      for (std::size_t j = 0; j < spec.input_dim; ++j) {
        own[k][j] = spec.relatedness * proto[k][j] + (1.0 - spec.relatedness) * own[k][j];
        n += own[k][j] * own[k][j];
      }
      n = std::sqrt(n);
      for (double& x : own[k]) x /= n;
    }
    tasks.push_back(detail::sample_task("task-" + std::to_string(t), task_seed,
                                        spec.samples, spec.input_dim, spec.classes,
                                        spec.m_x, spec.separation, own));
  }
  return tasks;
}

// The family's shared geometry as its own dataset; used to pretrain bases.
inline TaskDataset make_pretrain_task(std::uint64_t seed, const TaskFamilySpec& spec) {
  SplitMix64 proto_rng(mix_seed(seed, 0xB00));
  const auto proto = detail::unit_directions(proto_rng, spec.classes, spec.input_dim);
  return detail::sample_task("pretrain", mix_seed(seed, 0xBA5E), spec.samples,
                             spec.input_dim, spec.classes, spec.m_x,
                             spec.separation, proto);
}

// Re-checks the construction invariants, e.g. after loading from disk.
inline void validate_dataset(const TaskDataset& ds) {
  if (ds.size() == 0) throw std::invalid_argument("dataset is empty");
  if (ds.labels.size() != ds.inputs.size())
    throw std::invalid_argument("dataset: labels/inputs length mismatch");
  std::vector<std::size_t> per_class(ds.num_classes, 0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.inputs[i].size() != ds.input_dim)
      throw std::invalid_argument("dataset: input dimension mismatch at sample " +
                                  std::to_string(i));
    if (ds.labels[i] < 0 || static_cast<std::size_t>(ds.labels[i]) >= ds.num_classes)
      throw std::invalid_argument("dataset: label out of range at sample " +
                                  std::to_string(i));
    per_class[ds.labels[i]]++;
    double norm_sq = 0.0;
    for (double v : ds.inputs[i]) norm_sq += v * v;
    if (std::sqrt(norm_sq) > ds.m_x_bound * (1.0 + 1e-12))
      throw std::invalid_argument("dataset: sample " + std::to_string(i) +
                                  " exceeds the recorded norm bound");
  }
  if (!ds.degenerate) {
    std::size_t lo = per_class[0], hi = per_class[0];
    for (std::size_t c : per_class) {
      lo = std::min(lo, c);
      hi = std::max(hi, c);
    }
    if (lo == 0) throw std::invalid_argument("dataset: missing class");
    if (hi - lo > 1) throw std::invalid_argument("dataset: class imbalance > 1");
  }
}

}  // namespace tavlab
