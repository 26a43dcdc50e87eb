// Task vectors, the task-arithmetic merge, and the curvature terms that
// govern the gap between merging and joint training.
//
// For tasks t with mean losses L_t, a multitask trajectory theta^(0..k) run
// at step alpha*eta, and per-task finetuning at step eta:
//
//   r_t(theta)  = alpha * sum_t' grad L_t'(theta) - grad L_t(theta)
//   p_t^k       = sum_{j=0..k} r_t(theta^(j))
//   s_t^k       = sum_{j=0..k} hessian L_t(anchor(j)) [ p_t^j ]
//   C           = sum_t s_t^h, scaled by a sign and an alpha factor
//
// The anchor is either theta^(j) or theta^(j+1); both differ only at the
// next order in eta. Sign and alpha factor carry the same ambiguity, so all
// combinations are exposed as CurvatureTermConfig candidates and the
// eta-scaling experiment picks the one whose corrected residual decays one
// order faster than the raw gap. s and C are built from Hessian-vector
// products; dense Hessians appear only in test oracles.
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "tavlab/loss.hpp"
#include "tavlab/network.hpp"
#include "tavlab/parallel.hpp"
#include "tavlab/tensor.hpp"
#include "tavlab/trainer.hpp"

namespace tavlab {

struct TaskVector {
  std::string task_id;
  std::size_t epochs = 0;
  ParamVector delta;  // theta_t^(k) - theta_base
};

inline TaskVector task_vector(const Trajectory& traj, const std::string& task_id = "") {
  if (traj.epochs() < 1) throw std::invalid_argument("task_vector: empty trajectory");
  TaskVector tv;
  tv.task_id = task_id;
  tv.epochs = traj.epochs();
  tv.delta = subtract(traj.checkpoints.back(), traj.checkpoints.front());
  return tv;
}

// sum_t delta_t in task order.
inline ParamVector multitask_vector(const std::vector<TaskVector>& vectors) {
  if (vectors.empty()) throw std::invalid_argument("multitask_vector: no vectors");
  ParamVector sum(vectors.front().delta.size(), 0.0);
  for (const TaskVector& tv : vectors) axpy(1.0, tv.delta, sum);
  return sum;
}

// theta_base + alpha * sum_t delta_t
inline MlpModel merge_ta(const MlpModel& base, const std::vector<TaskVector>& vectors,
                         double alpha) {
  const ParamVector sum = multitask_vector(vectors);
  if (sum.size() != base.arch.param_count())
    throw std::invalid_argument("merge_ta: vector length mismatch");
  MlpModel merged = base;
  param_axpy(merged, alpha, sum);
  return merged;
}

// Repeated short-finetune-then-merge rounds. Checkpoints are the successive
// merged bases; the recorded loss is the aggregated loss at each base.
inline Trajectory iterative_ta(const MlpModel& base, const std::vector<TaskDataset>& tasks,
                               std::size_t rounds, std::size_t epochs_per_round,
                               const TrainConfig& cfg) {
  if (rounds < 1) throw std::invalid_argument("iterative_ta: rounds must be >= 1");
  if (tasks.empty()) throw std::invalid_argument("iterative_ta: no tasks");
  TrainConfig round_cfg = cfg;
  round_cfg.epochs = epochs_per_round;
  Trajectory traj;
  traj.arch = base.arch;
  traj.step_size = cfg.alpha * cfg.eta;
  MlpModel current = base;
  traj.checkpoints.push_back(flatten(current));
  for (std::size_t r = 0; r < rounds; ++r) {
    std::vector<TaskVector> vectors(tasks.size());
    parallel_for(tasks.size(), [&](std::size_t t) {
      vectors[t] = task_vector(finetune(current, tasks[t], round_cfg), tasks[t].task_id);
    });
    current = merge_ta(current, vectors, cfg.alpha);
    EpochRecord rec;
    const LossGrad lg = aggregate_loss_grad(current, tasks);
    rec.loss = lg.loss;
    rec.grad_norm = norm2(lg.grad);
    traj.records.push_back(std::move(rec));
    traj.checkpoints.push_back(flatten(current));
  }
  return traj;
}

// Which checkpoint the Hessian in s_t^k is evaluated at: the start of step j
// (theta^(j)) or its end (theta^(j+1)). Both are order-consistent; they
// differ only at the next order in eta.
enum class HessianAnchor { step_start, step_end };

inline const char* anchor_name(HessianAnchor a) {
  return a == HessianAnchor::step_start ? "step_start" : "step_end";
}

// Multiplier applied on top of the raw curvature sum. Derivations of the
// same expansion disagree on the sign and on whether alpha and a factor 2
// belong in the coefficient, so every combination is a candidate and
// gap_scan selects by the measured residual order.
enum class AlphaFactor { one, alpha, two, two_alpha };

inline const char* alpha_factor_name(AlphaFactor f) {
  switch (f) {
    case AlphaFactor::one: return "1";
    case AlphaFactor::alpha: return "alpha";
    case AlphaFactor::two: return "2";
    case AlphaFactor::two_alpha: return "2*alpha";
  }
  return "?";
}

inline double alpha_factor_value(AlphaFactor f, double alpha) {
  switch (f) {
    case AlphaFactor::one: return 1.0;
    case AlphaFactor::alpha: return alpha;
    case AlphaFactor::two: return 2.0;
    case AlphaFactor::two_alpha: return 2.0 * alpha;
  }
  return 1.0;
}

struct CurvatureTermConfig {
  HessianAnchor anchor = HessianAnchor::step_start;
  int sign = +1;  // +1 or -1
  AlphaFactor alpha_factor = AlphaFactor::one;

  double factor(double alpha) const {
    return static_cast<double>(sign) * alpha_factor_value(alpha_factor, alpha);
  }
  std::string name() const {
    return std::string(anchor_name(anchor)) + (sign > 0 ? "/+" : "/-") +
           alpha_factor_name(alpha_factor);
  }
  bool operator==(const CurvatureTermConfig&) const = default;
};

// All candidate conventions, in the fixed preference order used for
// selection ties.
inline std::vector<CurvatureTermConfig> curvature_config_candidates() {
  std::vector<CurvatureTermConfig> out;
  for (HessianAnchor anchor : {HessianAnchor::step_start, HessianAnchor::step_end})
    for (int sign : {+1, -1})
      for (AlphaFactor f : {AlphaFactor::one, AlphaFactor::alpha, AlphaFactor::two,
                            AlphaFactor::two_alpha})
        out.push_back({anchor, sign, f});
  return out;
}

// Per-checkpoint task gradients of a multitask trajectory, the shared input
// of r/p/s/C. grads[j][t] = grad L_t(theta^(j)).
struct TrajectoryGradients {
  std::vector<std::vector<ParamVector>> grads;

  static TrajectoryGradients compute(const MlpArchitecture& arch,
                                     const std::vector<ParamVector>& checkpoints,
                                     const std::vector<TaskDataset>& tasks) {
    TrajectoryGradients tg;
    tg.grads.assign(checkpoints.size(), {});
    for (auto& row : tg.grads) row.resize(tasks.size());
    parallel_for(checkpoints.size() * tasks.size(), [&](std::size_t idx) {
      const std::size_t j = idx / tasks.size();
      const std::size_t t = idx % tasks.size();
      const MlpModel m = unflatten(arch, checkpoints[j]);
      tg.grads[j][t] = grad(m, tasks[t]);
    });
    return tg;
  }

  // r_t at checkpoint j.
  ParamVector residual(std::size_t t, std::size_t j, double alpha) const {
    const auto& row = grads[j];
    ParamVector r(row[0].size(), 0.0);
    for (const ParamVector& g : row) axpy(alpha, g, r);
    axpy(-1.0, row[t], r);
    return r;
  }
};

// r_t(theta) = alpha * sum_t' grad L_t'(theta) - grad L_t(theta)
inline ParamVector residual_r(std::size_t t, const MlpModel& model,
                              const std::vector<TaskDataset>& tasks, double alpha) {
  if (t >= tasks.size()) throw std::invalid_argument("residual_r: bad task index");
  ParamVector r(model.arch.param_count(), 0.0);
  std::vector<ParamVector> grads(tasks.size());
  parallel_for(tasks.size(), [&](std::size_t i) { grads[i] = grad(model, tasks[i]); });
  for (const ParamVector& g : grads) axpy(alpha, g, r);
  axpy(-1.0, grads[t], r);
  return r;
}

// p_t^k = sum_{j=0..k} r_t(theta^(j))
inline ParamVector accum_p(std::size_t t, const MlpArchitecture& arch,
                           const std::vector<ParamVector>& checkpoints, std::size_t k,
                           const std::vector<TaskDataset>& tasks, double alpha) {
  if (k + 1 > checkpoints.size())
    throw std::invalid_argument("accum_p: insufficient checkpoints");
  const TrajectoryGradients tg =
      TrajectoryGradients::compute(arch, {checkpoints.begin(), checkpoints.begin() + k + 1}, tasks);
  ParamVector p(arch.param_count(), 0.0);
  for (std::size_t j = 0; j <= k; ++j) axpy(1.0, tg.residual(t, j, alpha), p);
  return p;
}

namespace detail {

// s_t^k from precomputed gradients; needs checkpoints up to k (+1 for the
// step_end anchor).
inline ParamVector curvature_s_impl(std::size_t t, const MlpArchitecture& arch,
                                    const std::vector<ParamVector>& checkpoints,
                                    std::size_t k, const std::vector<TaskDataset>& tasks,
                                    double alpha, HessianAnchor anchor,
                                    const TrajectoryGradients& tg) {
  const std::size_t needed = anchor == HessianAnchor::step_end ? k + 2 : k + 1;
  if (checkpoints.size() < needed)
    throw std::invalid_argument("curvature term: insufficient checkpoints");
  ParamVector s(arch.param_count(), 0.0);
  ParamVector p(arch.param_count(), 0.0);
  for (std::size_t j = 0; j <= k; ++j) {
    axpy(1.0, tg.residual(t, j, alpha), p);
    const std::size_t anchor_idx = anchor == HessianAnchor::step_end ? j + 1 : j;
    const MlpModel m = unflatten(arch, checkpoints[anchor_idx]);
    axpy(1.0, hvp(m, tasks[t], p), s);
  }
  return s;
}

}  // namespace detail

// s_t^k = sum_{j=0..k} hessian L_t(anchor(j)) [ p_t^j ]
inline ParamVector curvature_s(std::size_t t, const MlpArchitecture& arch,
                               const std::vector<ParamVector>& checkpoints,
                               std::size_t k, const std::vector<TaskDataset>& tasks,
                               double alpha,
                               HessianAnchor anchor = HessianAnchor::step_start) {
  if (t >= tasks.size()) throw std::invalid_argument("curvature_s: bad task index");
  const TrajectoryGradients tg = TrajectoryGradients::compute(
      arch, {checkpoints.begin(), checkpoints.begin() + std::min(checkpoints.size(), k + 1)},
      tasks);
  return detail::curvature_s_impl(t, arch, checkpoints, k, tasks, alpha, anchor, tg);
}

// sum_t s_t^h in task order, before any sign/alpha modulation.
inline ParamVector curvature_sum(const MlpArchitecture& arch,
                                 const std::vector<ParamVector>& checkpoints,
                                 std::size_t h, const std::vector<TaskDataset>& tasks,
                                 double alpha, HessianAnchor anchor) {
  const TrajectoryGradients tg = TrajectoryGradients::compute(
      arch, {checkpoints.begin(), checkpoints.begin() + std::min(checkpoints.size(), h + 1)},
      tasks);
  std::vector<ParamVector> per_task(tasks.size());
  parallel_for(tasks.size(), [&](std::size_t t) {
    per_task[t] = detail::curvature_s_impl(t, arch, checkpoints, h, tasks, alpha, anchor, tg);
  });
  ParamVector c(arch.param_count(), 0.0);
  for (const ParamVector& s : per_task) axpy(1.0, s, c);
  return c;
}

// C = factor * sum_t s_t^h.
inline ParamVector coefficient_C(const MlpArchitecture& arch,
                                 const std::vector<ParamVector>& checkpoints,
                                 std::size_t h, const std::vector<TaskDataset>& tasks,
                                 double alpha, const CurvatureTermConfig& cfg) {
  ParamVector c = curvature_sum(arch, checkpoints, h, tasks, alpha, cfg.anchor);
  const double f = cfg.factor(alpha);
  for (double& x : c) x *= f;
  return c;
}

}  // namespace tavlab
