// Quantitative verification: eta-scaling regressions for the merge/joint
// equivalence, uniform bound certification, gradient dominance and alignment
// statistics, and 2D projection of checkpoint trajectories.
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tavlab/loss.hpp"
#include "tavlab/network.hpp"
#include "tavlab/parallel.hpp"
#include "tavlab/task_arithmetic.hpp"
#include "tavlab/taskgen.hpp"
#include "tavlab/tensor.hpp"
#include "tavlab/trainer.hpp"

namespace tavlab {

inline double quiet_nan() { return std::numeric_limits<double>::quiet_NaN(); }

// ---------------------------------------------------------------------------
// Log-log order fit

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t points_used = 0;
  std::vector<std::size_t> excluded;  // indices dropped (non-finite or <= floor)
};

// Ordinary least squares on (log eta, log norm). Norms at or below the floor
// are excluded and reported; fewer than two usable points is an error.
inline FitResult fit_order(const std::vector<double>& etas,
                           const std::vector<double>& norms, double floor = 0.0) {
  if (etas.size() != norms.size())
    throw std::invalid_argument("fit_order: grid/norm length mismatch");
  FitResult fit;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < etas.size(); ++i) {
    if (!std::isfinite(norms[i]) || norms[i] <= floor || etas[i] <= 0.0) {
      fit.excluded.push_back(i);
      continue;
    }
    xs.push_back(std::log(etas[i]));
    ys.push_back(std::log(norms[i]));
  }
  if (xs.size() < 2) throw std::runtime_error("fit_order: fewer than 2 usable points");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = ys[i] - (fit.intercept + fit.slope * xs[i]);
    ss_res += e * e;
  }
  fit.r2 = syy == 0.0 ? 1.0 : 1.0 - ss_res / syy;
  fit.points_used = xs.size();
  return fit;
}

inline std::vector<double> geometric_grid(double start, double factor,
                                          std::size_t points) {
  if (!(start > 0.0) || !(factor > 0.0) || factor >= 1.0)
    throw std::invalid_argument("geometric_grid: need start > 0 and factor in (0,1)");
  std::vector<double> grid(points);
  double v = start;
  for (std::size_t i = 0; i < points; ++i) {
    grid[i] = v;
    v *= factor;
  }
  return grid;
}

// ---------------------------------------------------------------------------
// Gap scan: || theta_TA^(k) - theta_MT^(k) || across an eta grid

constexpr double kGapNoiseFloor = 1e-13;
// Candidates whose |slope - 3| lands within this window of the best are
// resolved by enumeration order; the two anchors differ only at the next
// order in eta, so a bare argmin between them would flip with fit noise.
constexpr double kSelectionWindow = 0.25;

struct GapCandidate {
  CurvatureTermConfig config;
  std::vector<double> residual_norms;  // per eta; NaN where the run diverged
  std::optional<FitResult> fit;
};

struct GapReport {
  std::size_t epochs = 0;  // k
  std::size_t task_count = 0;
  double alpha = 0.0;
  std::vector<double> eta_grid;
  // one slot per eta, written concurrently; kept byte-sized (vector<bool>
  // packs bits and adjacent writes would race)
  std::vector<std::uint8_t> diverged;
  std::vector<double> gap_norms;
  std::optional<FitResult> raw_fit;
  std::vector<GapCandidate> candidates;      // empty when k < 2
  std::optional<std::size_t> selected_candidate;

  const CurvatureTermConfig& selected_config() const {
    if (!selected_candidate) throw std::logic_error("no candidate selected");
    return candidates[*selected_candidate].config;
  }
};

namespace detail {

inline std::optional<std::size_t> select_candidate(const std::vector<GapCandidate>& cands) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : cands)
    if (c.fit) best = std::min(best, std::abs(c.fit->slope - 3.0));
  if (!std::isfinite(best)) return std::nullopt;
  for (std::size_t i = 0; i < cands.size(); ++i)
    if (cands[i].fit && std::abs(cands[i].fit->slope - 3.0) <= best + kSelectionWindow)
      return i;
  return std::nullopt;
}

}  // namespace detail

// For each eta: finetune every task k epochs at eta, merge with coefficient
// alpha, train the aggregated loss k epochs at alpha*eta, and record the gap
// between the two endpoints. For k >= 2 every curvature convention is tried
// as a correction; the one whose residual decays closest to cubic order is
// selected. Divergent etas are dropped and flagged.
inline GapReport gap_scan(const MlpModel& base, const std::vector<TaskDataset>& tasks,
                          std::size_t k, double alpha,
                          const std::vector<double>& eta_grid) {
  if (eta_grid.size() < 5)
    throw std::invalid_argument("gap_scan: need at least 5 grid points");
  for (std::size_t i = 1; i < eta_grid.size(); ++i)
    if (!(eta_grid[i] < eta_grid[i - 1]))
      throw std::invalid_argument("gap_scan: eta grid must be strictly decreasing");
  if (k < 1) throw std::invalid_argument("gap_scan: k must be >= 1");

  GapReport report;
  report.epochs = k;
  report.task_count = tasks.size();
  report.alpha = alpha;
  report.eta_grid = eta_grid;
  report.diverged.assign(eta_grid.size(), 0);
  report.gap_norms.assign(eta_grid.size(), quiet_nan());

  const auto candidate_configs = curvature_config_candidates();
  if (k >= 2) {
    report.candidates.resize(candidate_configs.size());
    for (std::size_t c = 0; c < candidate_configs.size(); ++c) {
      report.candidates[c].config = candidate_configs[c];
      report.candidates[c].residual_norms.assign(eta_grid.size(), quiet_nan());
    }
  }

  parallel_for(eta_grid.size(), [&](std::size_t i) {
    const double eta = eta_grid[i];
    TrainConfig cfg;
    cfg.eta = eta;
    cfg.alpha = alpha;
    cfg.epochs = k;
    try {
      std::vector<TaskVector> vectors(tasks.size());
      for (std::size_t t = 0; t < tasks.size(); ++t)
        vectors[t] = task_vector(finetune(base, tasks[t], cfg), tasks[t].task_id);
      const Trajectory mt = train_multitask(base, tasks, cfg);
      const MlpModel merged = merge_ta(base, vectors, alpha);
      const ParamVector gap = subtract(flatten(merged), mt.final_params());
      report.gap_norms[i] = norm2(gap);
      if (k >= 2) {
        const std::size_t h = k - 2;
        for (HessianAnchor anchor : {HessianAnchor::step_start, HessianAnchor::step_end}) {
          const ParamVector raw_sum =
              curvature_sum(base.arch, mt.checkpoints, h, tasks, alpha, anchor);
          for (std::size_t c = 0; c < candidate_configs.size(); ++c) {
            if (candidate_configs[c].anchor != anchor) continue;
            const double f = candidate_configs[c].factor(alpha) * eta * eta / 2.0;
            ParamVector residual = gap;
            axpy(-f, raw_sum, residual);
            report.candidates[c].residual_norms[i] = norm2(residual);
          }
        }
      }
    } catch (const TrainingError&) {
      report.diverged[i] = 1;
    }
  });

  try {
    report.raw_fit = fit_order(report.eta_grid, report.gap_norms, kGapNoiseFloor);
  } catch (const std::runtime_error&) {
    report.raw_fit.reset();
  }
  for (auto& cand : report.candidates) {
    try {
      cand.fit = fit_order(report.eta_grid, cand.residual_norms, kGapNoiseFloor);
    } catch (const std::runtime_error&) {
      cand.fit.reset();
    }
  }
  report.selected_candidate = detail::select_candidate(report.candidates);
  return report;
}

// ---------------------------------------------------------------------------
// Per-task expansion check: theta_t^(m+1) - theta_MT^(m+1) against eta p_t^m
// and the eta^2 curvature correction

struct ExpansionCorrection {
  HessianAnchor anchor = HessianAnchor::step_start;
  double coefficient = 0.5;  // multiplies eta^2 * s_t^(m-1)

  std::string name() const {
    return std::string(anchor_name(anchor)) + "/" +
           (coefficient == 0.5 ? "1/2" : "1");
  }
};

inline std::vector<ExpansionCorrection> expansion_correction_candidates() {
  return {{HessianAnchor::step_start, 0.5},
          {HessianAnchor::step_start, 1.0},
          {HessianAnchor::step_end, 0.5},
          {HessianAnchor::step_end, 1.0}};
}

struct ExpansionCell {
  std::size_t m = 0;
  std::size_t task = 0;
  std::vector<double> first_norms;                 // per eta
  std::vector<std::vector<double>> corrected;      // [candidate][eta]
  std::optional<FitResult> first_fit;
  std::vector<std::optional<FitResult>> corrected_fits;
};

struct ExpansionReport {
  std::vector<double> eta_grid;
  std::vector<std::size_t> m_values;
  double alpha = 0.0;
  std::vector<ExpansionCorrection> candidates;
  std::vector<ExpansionCell> cells;  // one per (m, task)
  std::optional<std::size_t> selected_candidate;
};

// Runs both trainings across the eta grid and fits, per task and per m, the
// order of || theta_t^(m+1) - theta_MT^(m+1) - eta p_t^m || and of the same
// quantity with each candidate eta^2 s-correction added back.
inline ExpansionReport expansion_scan(const MlpModel& base, const std::vector<TaskDataset>& tasks,
                              double alpha, const std::vector<std::size_t>& m_values,
                              const std::vector<double>& eta_grid) {
  if (m_values.empty()) throw std::invalid_argument("expansion_scan: no m values");
  std::size_t max_m = 0;
  for (std::size_t m : m_values) {
    if (m < 1) throw std::invalid_argument("expansion_scan: m must be >= 1");
    max_m = std::max(max_m, m);
  }
  ExpansionReport report;
  report.eta_grid = eta_grid;
  report.m_values = m_values;
  report.alpha = alpha;
  report.candidates = expansion_correction_candidates();
  report.cells.resize(m_values.size() * tasks.size());
  for (std::size_t mi = 0; mi < m_values.size(); ++mi)
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      ExpansionCell& cell = report.cells[mi * tasks.size() + t];
      cell.m = m_values[mi];
      cell.task = t;
      cell.first_norms.assign(eta_grid.size(), quiet_nan());
      cell.corrected.assign(report.candidates.size(),
                            std::vector<double>(eta_grid.size(), quiet_nan()));
      cell.corrected_fits.resize(report.candidates.size());
    }

  const std::size_t epochs = max_m + 1;
  parallel_for(eta_grid.size(), [&](std::size_t i) {
    const double eta = eta_grid[i];
    TrainConfig cfg;
    cfg.eta = eta;
    cfg.alpha = alpha;
    cfg.epochs = epochs;
    std::vector<Trajectory> single(tasks.size());
    for (std::size_t t = 0; t < tasks.size(); ++t)
      single[t] = finetune(base, tasks[t], cfg);
    const Trajectory mt = train_multitask(base, tasks, cfg);
    const TrajectoryGradients tg =
        TrajectoryGradients::compute(base.arch, mt.checkpoints, tasks);

    for (std::size_t mi = 0; mi < m_values.size(); ++mi) {
      const std::size_t m = m_values[mi];
      for (std::size_t t = 0; t < tasks.size(); ++t) {
        ExpansionCell& cell = report.cells[mi * tasks.size() + t];
        const ParamVector delta =
            subtract(single[t].checkpoints[m + 1], mt.checkpoints[m + 1]);
        ParamVector p(delta.size(), 0.0);
        for (std::size_t j = 0; j <= m; ++j) axpy(1.0, tg.residual(t, j, alpha), p);
        ParamVector first = delta;
        axpy(-eta, p, first);
        cell.first_norms[i] = norm2(first);
        for (std::size_t c = 0; c < report.candidates.size(); ++c) {
          const ExpansionCorrection& cand = report.candidates[c];
          const ParamVector s = detail::curvature_s_impl(
              t, base.arch, mt.checkpoints, m - 1, tasks, alpha, cand.anchor, tg);
          ParamVector corrected = first;
          axpy(cand.coefficient * eta * eta, s, corrected);
          cell.corrected[c][i] = norm2(corrected);
        }
      }
    }
  });

  // Fits plus a single global candidate choice (mean |slope-3| over cells,
  // ties to the earliest candidate within the selection window).
  std::vector<double> mean_dist(report.candidates.size(), 0.0);
  std::vector<bool> usable(report.candidates.size(), true);
  for (auto& cell : report.cells) {
    try {
      cell.first_fit = fit_order(report.eta_grid, cell.first_norms, kGapNoiseFloor);
    } catch (const std::runtime_error&) {
      cell.first_fit.reset();
    }
    for (std::size_t c = 0; c < report.candidates.size(); ++c) {
      try {
        cell.corrected_fits[c] =
            fit_order(report.eta_grid, cell.corrected[c], kGapNoiseFloor);
        mean_dist[c] += std::abs(cell.corrected_fits[c]->slope - 3.0);
      } catch (const std::runtime_error&) {
        cell.corrected_fits[c].reset();
        usable[c] = false;
      }
    }
  }
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < report.candidates.size(); ++c)
    if (usable[c]) best = std::min(best, mean_dist[c]);
  if (std::isfinite(best))
    for (std::size_t c = 0; c < report.candidates.size(); ++c)
      if (usable[c] && mean_dist[c] <= best + kSelectionWindow * report.cells.size()) {
        report.selected_candidate = c;
        break;
      }
  return report;
}

// ---------------------------------------------------------------------------
// Uniform bound certification

struct BoundReport {
  std::string activation;
  std::size_t depth = 0;
  std::size_t task_count = 0;
  double alpha = 0.0;
  std::size_t horizon = 0;  // h in the curvature sum
  std::size_t checkpoints_measured = 0;

  // measured
  std::vector<double> s_layers;  // max spectral norm per layer over checkpoints
  double pi = 0.0;
  double m_x = 0.0;
  double g_emp = 0.0;
  double h_emp = 0.0;
  double softmax_lambda_max = 0.0;
  double c_norm_step_start = 0.0;
  double c_norm_step_end = 0.0;

  // theoretical
  double beta = 0.0;
  double gamma = 0.0;
  double g_bound = 0.0;
  double h_bound_general = 0.0;        // 2 gamma Mx^2 Pi^2 beta^(2L-2)
  double h_bound_relu_gauss_newton = 0.0;  // Mx^2 Pi^2 beta^(2L-2) / 2
  double h_bound_relu_statement = 0.0;     // sqrt(2)/2 Mx^3 Pi^3 beta^(3L-3)
  std::string h_bound_label;           // which H feeds the C bounds
  double h_bound_used = 0.0;
  double binomial_factor = 0.0;        // (h+1)(h+2)/2
  double c_bound_variant_t = 0.0;      // T binom |alpha T - 1| H G
  double c_bound_variant_t1 = 0.0;     // T binom |alpha (T+1) - 1| H G

  // ratios measured / bound
  double g_ratio = 0.0;
  double h_ratio = 0.0;
  double c_ratio_t = 0.0;
  double c_ratio_t1 = 0.0;
};

namespace detail {

inline double symmetric_lambda_max(const DenseMatrix& m, std::uint64_t seed = 5) {
  return spectral_norm(m, 1e-12, 20000, seed);
}

}  // namespace detail

// Certifies the uniform gradient/Hessian/C bounds on the visited
// checkpoints. Per-layer spectral bounds s_l are the measured maxima over
// every checkpoint, which makes the premise ||W^(l)|| <= s_l hold by
// construction; the bound side then depends only on the activation constants
// and the input bound.
inline BoundReport certify_bounds(const MlpArchitecture& arch, const Trajectory& mt,
                                   const std::vector<Trajectory>& per_task,
                                   const std::vector<TaskDataset>& tasks, double alpha,
                                   std::size_t h, std::size_t dense_cap = 600) {
  if (arch.bias_enabled)
    throw std::invalid_argument("certify_bounds: weights-only networks required");
  if (!std::isfinite(gamma_phi(arch.activation)))
    throw std::invalid_argument("certify_bounds: unsupported activation");

  BoundReport report;
  report.activation = activation_name(arch.activation);
  report.depth = arch.depth();
  report.task_count = tasks.size();
  report.alpha = alpha;
  report.horizon = h;

  std::vector<const ParamVector*> checkpoints;
  for (const ParamVector& c : mt.checkpoints) checkpoints.push_back(&c);
  for (const Trajectory& traj : per_task)
    for (const ParamVector& c : traj.checkpoints) checkpoints.push_back(&c);
  report.checkpoints_measured = checkpoints.size();

  report.s_layers.assign(arch.depth(), 0.0);
  for (const TaskDataset& t : tasks) report.m_x = std::max(report.m_x, t.m_x_bound);

  struct PointStats {
    std::vector<double> s;
    double g = 0.0, hn = 0.0, lmax = 0.0;
  };
  std::vector<PointStats> stats(checkpoints.size());
  parallel_for(checkpoints.size(), [&](std::size_t i) {
    const MlpModel model = unflatten(arch, *checkpoints[i]);
    PointStats& ps = stats[i];
    ps.s.resize(arch.depth());
    for (std::size_t l = 0; l < arch.depth(); ++l)
      ps.s[l] = spectral_norm(model.weights[l]);
    for (const TaskDataset& task : tasks) {
      ps.g = std::max(ps.g, norm2(grad(model, task)));
      if (arch.param_count() <= dense_cap) {
        const FullHessian fh = full_hessian(model, task, dense_cap);
        ps.hn = std::max(ps.hn, spectral_norm(fh.matrix));
      } else {
        ps.hn = std::max(ps.hn, hessian_spectral_norm(model, task));
      }
      for (const auto& x : task.inputs) {
        const SoftmaxState sm = softmax_stable(forward(model, x));
        ps.lmax = std::max(ps.lmax, detail::symmetric_lambda_max(logits_hessian(sm)));
      }
    }
  });
  for (const PointStats& ps : stats) {
    for (std::size_t l = 0; l < arch.depth(); ++l)
      report.s_layers[l] = std::max(report.s_layers[l], ps.s[l]);
    report.g_emp = std::max(report.g_emp, ps.g);
    report.h_emp = std::max(report.h_emp, ps.hn);
    report.softmax_lambda_max = std::max(report.softmax_lambda_max, ps.lmax);
  }
  report.pi = 1.0;
  for (double s : report.s_layers) report.pi *= s;

  report.c_norm_step_start =
      norm2(curvature_sum(arch, mt.checkpoints, h, tasks, alpha, HessianAnchor::step_start));
  report.c_norm_step_end =
      norm2(curvature_sum(arch, mt.checkpoints, h, tasks, alpha, HessianAnchor::step_end));

  const double beta = beta_phi(arch.activation);
  const double gamma = gamma_phi(arch.activation);
  const double depth_d = static_cast<double>(arch.depth());
  const double mx = report.m_x;
  const double pi = report.pi;
  report.beta = beta;
  report.gamma = gamma;
  report.g_bound = std::sqrt(2.0) * mx * pi * std::pow(beta, depth_d - 1.0);
  report.h_bound_general =
      2.0 * gamma * mx * mx * pi * pi * std::pow(beta, 2.0 * depth_d - 2.0);
  report.h_bound_relu_gauss_newton =
      0.5 * mx * mx * pi * pi * std::pow(beta, 2.0 * depth_d - 2.0);
  report.h_bound_relu_statement = 0.5 * std::sqrt(2.0) * mx * mx * mx * pi * pi * pi *
                                  std::pow(beta, 3.0 * depth_d - 3.0);

  if (arch.activation == Activation::relu) {
    // Two relu forms circulate; both are reported and the C bound uses the
    // tighter one that still dominates the measurement.
    const double lo = std::min(report.h_bound_relu_gauss_newton, report.h_bound_relu_statement);
    const double hi = std::max(report.h_bound_relu_gauss_newton, report.h_bound_relu_statement);
    if (report.h_emp <= lo) {
      report.h_bound_used = lo;
      report.h_bound_label = lo == report.h_bound_relu_gauss_newton
                                 ? "relu_gauss_newton"
                                 : "relu_statement";
    } else {
      report.h_bound_used = hi;
      report.h_bound_label = hi == report.h_bound_relu_gauss_newton
                                 ? "relu_gauss_newton"
                                 : "relu_statement";
    }
  } else {
    report.h_bound_used = report.h_bound_general;
    report.h_bound_label = "general";
  }

  const double t_count = static_cast<double>(tasks.size());
  const double hd = static_cast<double>(h);
  report.binomial_factor = (hd + 1.0) * (hd + 2.0) / 2.0;
  report.c_bound_variant_t = t_count * report.binomial_factor *
                             std::abs(alpha * t_count - 1.0) * report.h_bound_used *
                             report.g_bound;
  report.c_bound_variant_t1 = t_count * report.binomial_factor *
                              std::abs(alpha * (t_count + 1.0) - 1.0) *
                              report.h_bound_used * report.g_bound;

  const double c_meas =
      std::max(report.c_norm_step_start, report.c_norm_step_end);
  report.g_ratio = report.g_emp / report.g_bound;
  report.h_ratio = report.h_emp / (arch.activation == Activation::relu
                                       ? report.h_bound_used
                                       : report.h_bound_general);
  report.c_ratio_t = c_meas / report.c_bound_variant_t;
  report.c_ratio_t1 = c_meas / report.c_bound_variant_t1;
  return report;
}

// ---------------------------------------------------------------------------
// Gradient dominance and alignment

// Per-epoch gradient norms normalized to sum to one.
inline std::vector<double> grad_dominance(const Trajectory& traj) {
  if (traj.records.empty()) throw std::invalid_argument("grad_dominance: no records");
  double total = 0.0;
  for (const EpochRecord& r : traj.records) total += r.grad_norm;
  if (total == 0.0) throw std::invalid_argument("grad_dominance: all gradients zero");
  std::vector<double> out(traj.records.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = traj.records[i].grad_norm / total;
  return out;
}

struct CosineMatrix {
  DenseMatrix values;                      // symmetric, unit diagonal
  std::vector<std::size_t> undefined_rows; // zero-norm gradients; entries NaN
};

inline CosineMatrix cosine_matrix(const std::vector<ParamVector>& grads) {
  if (grads.empty()) throw std::invalid_argument("cosine_matrix: no gradients");
  const std::size_t n = grads.size();
  CosineMatrix cm;
  cm.values = DenseMatrix(n, n);
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    norms[i] = norm2(grads[i]);
    if (norms[i] == 0.0) cm.undefined_rows.push_back(i);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double v;
      if (i == j) {
        v = 1.0;
      } else if (norms[i] == 0.0 || norms[j] == 0.0) {
        v = quiet_nan();
      } else {
        v = dot(grads[i], grads[j]) / (norms[i] * norms[j]);
        v = std::min(1.0, std::max(-1.0, v));
      }
      cm.values.at(i, j) = v;
      cm.values.at(j, i) = v;
    }
  }
  return cm;
}

struct DominanceReport {
  std::size_t epochs = 0;
  std::vector<std::string> task_ids;
  std::vector<std::vector<double>> normalized_grad_norms;  // [task][epoch]
  std::vector<std::size_t> argmax_epoch;                   // 0-based
  std::vector<CosineMatrix> cosines;                       // vs epoch gradients
};

// Finetunes each task with gradient retention and reports the per-epoch
// normalized gradient norms plus the pairwise gradient cosine matrix.
inline DominanceReport dominance_experiment(const MlpModel& base,
                                            const std::vector<TaskDataset>& tasks,
                                            double eta, std::size_t epochs) {
  DominanceReport report;
  report.epochs = epochs;
  report.normalized_grad_norms.resize(tasks.size());
  report.argmax_epoch.resize(tasks.size());
  report.cosines.resize(tasks.size());
  for (const TaskDataset& t : tasks) report.task_ids.push_back(t.task_id);
  parallel_for(tasks.size(), [&](std::size_t t) {
    TrainConfig cfg;
    cfg.eta = eta;
    cfg.epochs = epochs;
    cfg.retain_gradients = true;
    const Trajectory traj = finetune(base, tasks[t], cfg);
    report.normalized_grad_norms[t] = grad_dominance(traj);
    std::size_t best = 0;
    for (std::size_t e = 1; e < report.normalized_grad_norms[t].size(); ++e)
      if (report.normalized_grad_norms[t][e] > report.normalized_grad_norms[t][best])
        best = e;
    report.argmax_epoch[t] = best;
    std::vector<ParamVector> grads;
    for (const EpochRecord& r : traj.records) grads.push_back(*r.grad);
    report.cosines[t] = cosine_matrix(grads);
  });
  return report;
}

// ---------------------------------------------------------------------------
// 2D PCA projection of checkpoints

struct PcaProjection {
  std::vector<std::array<double, 2>> points;
  std::array<double, 2> explained_variance = {0.0, 0.0};  // fractions of total
  std::array<std::vector<double>, 2> directions;
  bool rank_deficient = false;
};

namespace detail {

// Top eigenpair of a small symmetric PSD matrix by power iteration.
inline std::pair<double, std::vector<double>> top_eigenpair(const DenseMatrix& g,
                                                            std::uint64_t seed) {
  SplitMix64 rng(mix_seed(seed, 0xE16));
  std::vector<double> v(g.rows);
  for (double& x : v) x = rng.next_normal();
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  for (double& x : v) x /= n;
  std::vector<double> w;
  double lambda = 0.0;
  for (std::size_t iter = 0; iter < 20000; ++iter) {
    matvec(g, v, w);
    double wn = 0.0;
    for (double x : w) wn += x * x;
    wn = std::sqrt(wn);
    if (wn == 0.0) return {0.0, v};
    const double prev = lambda;
    lambda = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) lambda += v[i] * w[i];
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = w[i] / wn;
    if (iter > 0 && std::abs(lambda - prev) <= 1e-14 * std::abs(lambda)) break;
  }
  return {lambda, v};
}

}  // namespace detail

// Centers the checkpoint stack, extracts the top-2 principal directions from
// its Gram matrix, and projects. Directions are sign-fixed so their first
// nonzero coordinate is positive.
inline PcaProjection pca_project(const std::vector<ParamVector>& checkpoints) {
  if (checkpoints.size() < 3)
    throw std::invalid_argument("pca_project: need at least 3 checkpoints");
  const std::size_t m = checkpoints.size();
  const std::size_t p = checkpoints.front().size();
  std::vector<double> mean(p, 0.0);
  for (const ParamVector& c : checkpoints) {
    if (c.size() != p) throw std::invalid_argument("pca_project: ragged checkpoints");
    for (std::size_t j = 0; j < p; ++j) mean[j] += c[j];
  }
  for (double& x : mean) x /= static_cast<double>(m);
  std::vector<ParamVector> centered(m, ParamVector(p));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < p; ++j) centered[i][j] = checkpoints[i][j] - mean[j];

  DenseMatrix gram(m, m);
  double trace = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = dot(centered[i], centered[j]);
      gram.at(i, j) = v;
      gram.at(j, i) = v;
      if (i == j) trace += v;
    }

  PcaProjection out;
  out.points.assign(m, {0.0, 0.0});
  out.directions[0].assign(p, 0.0);
  out.directions[1].assign(p, 0.0);
  if (trace == 0.0) {  // all checkpoints identical
    out.rank_deficient = true;
    return out;
  }

  auto [l1, u1] = detail::top_eigenpair(gram, 1);
  DenseMatrix deflated = gram;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) deflated.at(i, j) -= l1 * u1[i] * u1[j];
  auto [l2, u2] = detail::top_eigenpair(deflated, 2);
  if (l2 < 0.0) l2 = 0.0;
  if (l2 <= trace * 1e-14) {
    out.rank_deficient = true;
    l2 = 0.0;
  }

  for (std::size_t comp = 0; comp < 2; ++comp) {
    const double lambda = comp == 0 ? l1 : l2;
    const auto& u = comp == 0 ? u1 : u2;
    if (lambda <= 0.0) continue;
    std::vector<double>& dir = out.directions[comp];
    const double inv = 1.0 / std::sqrt(lambda);
    for (std::size_t j = 0; j < p; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i) s += centered[i][j] * u[i];
      dir[j] = s * inv;
    }
    double sign = 1.0;
    for (double x : dir) {
      if (x != 0.0) {
        sign = x > 0.0 ? 1.0 : -1.0;
        break;
      }
    }
    for (double& x : dir) x *= sign;
    for (std::size_t i = 0; i < m; ++i) out.points[i][comp] = dot(centered[i], dir);
  }
  out.explained_variance = {l1 / trace, l2 / trace};
  return out;
}

// ---------------------------------------------------------------------------
// One-epoch vs converged merging

struct HorizonEntry {
  double alpha = 0.0;
  std::vector<double> task_accuracy;
  double mean_accuracy = 0.0;
};

struct HorizonArm {
  std::string name;
  std::vector<std::size_t> epochs_per_task;
  std::vector<std::string> stop_reasons;
  std::vector<HorizonEntry> entries;  // one per alpha
  double best_alpha = 0.0;
  double best_mean_accuracy = 0.0;
};

struct HorizonReport {
  std::vector<double> alpha_grid;
  std::vector<double> base_accuracy;
  HorizonArm one_epoch;
  HorizonArm converged;
};

struct HorizonConfig {
  double eta = 0.05;
  double convergence_grad_tol = 1e-5;
  std::size_t max_epochs_converged = 5000;
  std::vector<double> alpha_grid;  // 1/T is appended when missing
};

// Merges one-epoch task vectors and converged task vectors across the alpha
// sweep and reports per-task accuracy of each merged model. Ties on the best
// mean accuracy resolve to the smaller alpha.
inline HorizonReport merge_horizon_experiment(const MlpModel& base,
                                              const std::vector<TaskDataset>& tasks,
                                              const HorizonConfig& cfg) {
  if (tasks.empty()) throw std::invalid_argument("merge_horizon: no tasks");
  HorizonReport report;
  report.alpha_grid = cfg.alpha_grid;
  const double natural = 1.0 / static_cast<double>(tasks.size());
  bool has_natural = false;
  for (double a : report.alpha_grid)
    if (std::abs(a - natural) <= 1e-12) has_natural = true;
  if (!has_natural) report.alpha_grid.push_back(natural);
  if (report.alpha_grid.empty()) throw std::invalid_argument("merge_horizon: empty alpha grid");

  for (const TaskDataset& t : tasks) report.base_accuracy.push_back(accuracy(base, t));

  std::vector<TaskVector> quick(tasks.size()), full(tasks.size());
  std::vector<std::size_t> quick_epochs(tasks.size()), full_epochs(tasks.size());
  std::vector<std::string> quick_stop(tasks.size()), full_stop(tasks.size());
  parallel_for(tasks.size(), [&](std::size_t t) {
    TrainConfig one;
    one.eta = cfg.eta;
    one.epochs = 1;
    const Trajectory tr1 = finetune(base, tasks[t], one);
    quick[t] = task_vector(tr1, tasks[t].task_id);
    quick_epochs[t] = tr1.epochs();
    quick_stop[t] = stop_reason_name(tr1.stop_reason);

    TrainConfig conv;
    conv.eta = cfg.eta;
    conv.convergence_grad_tol = cfg.convergence_grad_tol;
    conv.max_epochs_converged = cfg.max_epochs_converged;
    const Trajectory tr2 = train_to_convergence(base, tasks[t], conv);
    full[t] = task_vector(tr2, tasks[t].task_id);
    full_epochs[t] = tr2.epochs();
    full_stop[t] = stop_reason_name(tr2.stop_reason);
  });

  auto run_arm = [&](const std::string& name, const std::vector<TaskVector>& vectors,
                     std::vector<std::size_t> epochs, std::vector<std::string> stops) {
    HorizonArm arm;
    arm.name = name;
    arm.epochs_per_task = std::move(epochs);
    arm.stop_reasons = std::move(stops);
    for (double a : report.alpha_grid) {
      HorizonEntry entry;
      entry.alpha = a;
      const MlpModel merged = merge_ta(base, vectors, a);
      double mean = 0.0;
      for (const TaskDataset& t : tasks) {
        const double acc = accuracy(merged, t);
        entry.task_accuracy.push_back(acc);
        mean += acc;
      }
      entry.mean_accuracy = mean / static_cast<double>(tasks.size());
      arm.entries.push_back(std::move(entry));
    }
    arm.best_alpha = arm.entries.front().alpha;
    arm.best_mean_accuracy = arm.entries.front().mean_accuracy;
    for (const HorizonEntry& e : arm.entries)
      if (e.mean_accuracy > arm.best_mean_accuracy) {
        arm.best_mean_accuracy = e.mean_accuracy;
        arm.best_alpha = e.alpha;
      }
    return arm;
  };
  report.one_epoch = run_arm("one_epoch", quick, quick_epochs, quick_stop);
  report.converged = run_arm("converged", full, full_epochs, full_stop);
  return report;
}

}  // namespace tavlab
