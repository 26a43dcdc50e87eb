// Full-batch gradient descent. One epoch is exactly one gradient step on the
// whole dataset; there is no mini-batching anywhere. Trajectories store every
// checkpoint so any step can be replayed bit-exactly.
#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tavlab/loss.hpp"
#include "tavlab/network.hpp"
#include "tavlab/parallel.hpp"
#include "tavlab/taskgen.hpp"
#include "tavlab/tensor.hpp"

namespace tavlab {

struct TrainConfig {
  double eta = 0.05;                      // per-task step size
  double alpha = 1.0;                     // merge coefficient; multitask steps use alpha*eta
  std::size_t epochs = 1;
  std::optional<double> convergence_grad_tol;
  std::size_t max_epochs_converged = 5000;
  bool retain_gradients = false;

  void validate() const {
    if (!(eta >= 0.0)) throw std::invalid_argument("train config: eta must be >= 0");
    if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
  }
};

enum class StopReason { epochs, tol, cap };

inline const char* stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::epochs: return "epochs";
    case StopReason::tol: return "tol";
    case StopReason::cap: return "cap";
  }
  return "unknown";
}

struct EpochRecord {
  double loss = 0.0;       // loss at the checkpoint the step departs from
  double grad_norm = 0.0;
  std::optional<ParamVector> grad;  // retained only on request
};

struct Trajectory {
  MlpArchitecture arch;
  double step_size = 0.0;             // the actual step applied each epoch
  StopReason stop_reason = StopReason::epochs;
  std::vector<ParamVector> checkpoints;  // theta^(0) .. theta^(k)
  std::vector<EpochRecord> records;      // one per step taken

  std::size_t epochs() const { return checkpoints.empty() ? 0 : checkpoints.size() - 1; }
  const ParamVector& final_params() const { return checkpoints.back(); }
  MlpModel final_model() const { return unflatten(arch, checkpoints.back()); }
};

struct TrainingError : std::runtime_error {
  std::size_t epoch;
  TrainingError(const std::string& what, std::size_t epoch_index)
      : std::runtime_error(what + " at epoch " + std::to_string(epoch_index)),
        epoch(epoch_index) {}
};

namespace detail {

inline void record_step(Trajectory& traj, const LossGrad& lg, bool retain,
                        std::size_t epoch_index) {
  if (!std::isfinite(lg.loss) || !all_finite(lg.grad))
    throw TrainingError("non-finite loss", epoch_index);
  EpochRecord rec;
  rec.loss = lg.loss;
  rec.grad_norm = norm2(lg.grad);
  if (retain) rec.grad = lg.grad;
  traj.records.push_back(std::move(rec));
}

}  // namespace detail

// k epochs of GD on one task at step eta.
inline Trajectory finetune(const MlpModel& base, const TaskDataset& task,
                           const TrainConfig& cfg) {
  cfg.validate();
  Trajectory traj;
  traj.arch = base.arch;
  traj.step_size = cfg.eta;
  MlpModel model = base;
  traj.checkpoints.push_back(flatten(model));
  for (std::size_t e = 1; e <= cfg.epochs; ++e) {
    const LossGrad lg = loss_and_grad(model, task);
    detail::record_step(traj, lg, cfg.retain_gradients, e);
    param_axpy(model, -cfg.eta, lg.grad);
    traj.checkpoints.push_back(flatten(model));
  }
  return traj;
}

// Sum of per-task gradients of the aggregated loss, reduced in task order.
// Task gradients are evaluated concurrently; the reduce is sequential.
inline LossGrad aggregate_loss_grad(const MlpModel& model,
                                    const std::vector<TaskDataset>& tasks) {
  std::vector<LossGrad> per_task(tasks.size());
  parallel_for(tasks.size(), [&](std::size_t t) {
    per_task[t] = loss_and_grad(model, tasks[t]);
  });
  LossGrad total;
  total.grad.assign(model.arch.param_count(), 0.0);
  for (const LossGrad& lg : per_task) {
    total.loss += lg.loss;
    axpy(1.0, lg.grad, total.grad);
  }
  return total;
}

// k epochs of GD at step alpha*eta on the aggregated loss sum_t L_t.
inline Trajectory train_multitask(const MlpModel& base,
                                  const std::vector<TaskDataset>& tasks,
                                  const TrainConfig& cfg) {
  cfg.validate();
  if (tasks.empty()) throw std::invalid_argument("train_multitask: no tasks");
  Trajectory traj;
  traj.arch = base.arch;
  traj.step_size = cfg.alpha * cfg.eta;
  MlpModel model = base;
  traj.checkpoints.push_back(flatten(model));
  for (std::size_t e = 1; e <= cfg.epochs; ++e) {
    const LossGrad lg = aggregate_loss_grad(model, tasks);
    detail::record_step(traj, lg, cfg.retain_gradients, e);
    param_axpy(model, -traj.step_size, lg.grad);
    traj.checkpoints.push_back(flatten(model));
  }
  return traj;
}

// GD until ||grad|| < tol (checked before stepping) or the epoch cap.
inline Trajectory train_to_convergence(const MlpModel& base, const TaskDataset& task,
                                       const TrainConfig& cfg) {
  if (!cfg.convergence_grad_tol)
    throw std::invalid_argument("train_to_convergence: convergence_grad_tol not set");
  const double tol = *cfg.convergence_grad_tol;
  Trajectory traj;
  traj.arch = base.arch;
  traj.step_size = cfg.eta;
  MlpModel model = base;
  traj.checkpoints.push_back(flatten(model));
  traj.stop_reason = StopReason::cap;
  for (std::size_t e = 1; e <= cfg.max_epochs_converged; ++e) {
    const LossGrad lg = loss_and_grad(model, task);
    if (norm2(lg.grad) < tol) {
      traj.stop_reason = StopReason::tol;
      break;
    }
    detail::record_step(traj, lg, cfg.retain_gradients, e);
    param_axpy(model, -cfg.eta, lg.grad);
    traj.checkpoints.push_back(flatten(model));
  }
  return traj;
}

// Argmax-logit accuracy; ties resolve to the lower class index.
inline double accuracy(const MlpModel& model, const TaskDataset& data) {
  detail::check_dataset_model(model, data);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto logits = forward(model, data.inputs[i]);
    std::size_t best = 0;
    for (std::size_t k = 1; k < logits.size(); ++k)
      if (logits[k] > logits[best]) best = k;
    if (static_cast<int>(best) == data.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace tavlab
