#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "tavlab/analysis.hpp"
#include "tavlab/task_arithmetic.hpp"

using namespace tavlab;

namespace {

std::vector<TaskDataset> family(std::size_t count, std::uint64_t seed = 41,
                                std::size_t n = 40) {
  TaskFamilySpec spec;
  spec.count = count;
  spec.samples = n;
  spec.input_dim = 6;
  spec.classes = 3;
  spec.m_x = 1.0;
  spec.separation = 3.0;
  return make_task_family(seed, spec);
}

MlpModel base_net(std::uint64_t seed = 2) {
  return random_init({{6, 10, 3}, Activation::tanh, false}, seed);
}

}  // namespace

TEST_CASE("task vector basics") {
  const auto tasks = family(1);
  const MlpModel base = base_net();
  TrainConfig cfg;
  cfg.eta = 0.0;
  cfg.epochs = 2;
  CHECK(norm2(task_vector(finetune(base, tasks[0], cfg)).delta) == 0.0);

  cfg.eta = 0.05;
  cfg.epochs = 1;
  const TaskVector tv = task_vector(finetune(base, tasks[0], cfg), "t0");
  const ParamVector g = grad(base, tasks[0]);
  for (std::size_t i = 0; i < tv.delta.size(); ++i)
    CHECK(std::abs(tv.delta[i] + cfg.eta * g[i]) <= 1e-13);
  CHECK(tv.epochs == 1);
  CHECK(tv.task_id == "t0");
}

TEST_CASE("multi-epoch task vector telescopes the retained gradients") {
  const auto tasks = family(1, 43);
  const MlpModel base = base_net(5);
  TrainConfig cfg;
  cfg.eta = 0.05;
  cfg.epochs = 3;
  cfg.retain_gradients = true;
  const Trajectory traj = finetune(base, tasks[0], cfg);
  MlpModel replay = base;
  for (const EpochRecord& r : traj.records) param_axpy(replay, -cfg.eta, *r.grad);
  CHECK(flatten(replay) == traj.checkpoints.back());
  const TaskVector tv = task_vector(traj);
  CHECK(tv.delta == subtract(flatten(replay), flatten(base)));
}

TEST_CASE("merge_ta and multitask_vector") {
  const auto tasks = family(3, 47);
  const MlpModel base = base_net(6);
  TrainConfig cfg;
  cfg.eta = 0.05;
  cfg.epochs = 1;
  std::vector<TaskVector> vectors;
  for (const auto& t : tasks) vectors.push_back(task_vector(finetune(base, t, cfg)));

  CHECK(flatten(merge_ta(base, vectors, 0.0)) == flatten(base));

  const MlpModel one = merge_ta(base, {vectors[0]}, 1.0);
  const Trajectory ft = finetune(base, tasks[0], cfg);
  CHECK(norm2(subtract(flatten(one), ft.checkpoints.back())) <=
        1e-12 * (1.0 + norm2(flatten(base))));

  CHECK(multitask_vector({vectors[0]}) == vectors[0].delta);
  TaskVector flipped = vectors[0];
  for (double& d : flipped.delta) d = -d;
  CHECK(norm2(multitask_vector({vectors[0], flipped})) == 0.0);

  // k = 1 multitask vector is -eta * sum of base gradients
  ParamVector expectation(base.arch.param_count(), 0.0);
  for (const auto& t : tasks) axpy(-cfg.eta, grad(base, t), expectation);
  const ParamVector mt = multitask_vector(vectors);
  CHECK(norm2(subtract(mt, expectation)) <= 1e-13 * (1.0 + norm2(expectation)));

  TaskVector wrong = vectors[0];
  wrong.delta.pop_back();
  CHECK_THROWS_AS(merge_ta(base, {wrong}, 1.0), std::invalid_argument);
}

TEST_CASE("one-epoch merging equals one joint step across alphas") {
  const auto tasks = family(4, 53);
  const MlpModel base = base_net(7);
  const double base_scale = 1.0 + norm2(flatten(base));
  for (double alpha : {0.1, 0.25, 0.5, 0.7, 1.0}) {
    TrainConfig cfg;
    cfg.eta = 0.05;
    cfg.alpha = alpha;
    cfg.epochs = 1;
    std::vector<TaskVector> vectors;
    for (const auto& t : tasks) vectors.push_back(task_vector(finetune(base, t, cfg)));
    const MlpModel merged = merge_ta(base, vectors, alpha);
    const Trajectory mt = train_multitask(base, tasks, cfg);
    CHECK(norm2(subtract(flatten(merged), mt.final_params())) <= 1e-12 * base_scale);
  }
}

TEST_CASE("residual_r forms agree and degenerate correctly") {
  const auto tasks = family(3, 59);
  const MlpModel base = base_net(8);

  // T = 1, alpha = 1: r vanishes identically
  const auto solo = family(1, 59);
  CHECK(norm2(residual_r(0, base, solo, 1.0)) == 0.0);

  // alpha = 0: r = -grad
  const ParamVector r0 = residual_r(0, base, tasks, 0.0);
  const ParamVector g0 = grad(base, tasks[0]);
  CHECK(norm2(subtract(r0, scaled(g0, -1.0))) == 0.0);

  // the two written forms agree to machine precision
  const double alpha = 0.37;
  const ParamVector form_b = residual_r(1, base, tasks, alpha);
  ParamVector form_a(base.arch.param_count(), 0.0);
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    if (t == 1) continue;
    axpy(alpha, grad(base, tasks[t]), form_a);
  }
  axpy(alpha - 1.0, grad(base, tasks[1]), form_a);
  CHECK(norm2(subtract(form_a, form_b)) <= 1e-14 * (1.0 + norm2(form_b)));
}

TEST_CASE("accum_p accumulates residuals along the joint trajectory") {
  const auto tasks = family(3, 61);
  const MlpModel base = base_net(9);
  const double alpha = 0.4;
  TrainConfig cfg;
  cfg.eta = 0.05;
  cfg.alpha = alpha;
  cfg.epochs = 3;
  const Trajectory mt = train_multitask(base, tasks, cfg);

  const ParamVector p0 = accum_p(0, base.arch, mt.checkpoints, 0, tasks, alpha);
  CHECK(norm2(subtract(p0, residual_r(0, base, tasks, alpha))) == 0.0);

  // independent recomputation for k = 2
  const ParamVector p2 = accum_p(1, base.arch, mt.checkpoints, 2, tasks, alpha);
  ParamVector expected(base.arch.param_count(), 0.0);
  for (std::size_t j = 0; j <= 2; ++j) {
    const MlpModel mj = unflatten(base.arch, mt.checkpoints[j]);
    axpy(1.0, residual_r(1, mj, tasks, alpha), expected);
  }
  CHECK(norm2(subtract(p2, expected)) <= 1e-13 * (1.0 + norm2(expected)));
}

TEST_CASE("identical tasks with alpha = 1/T zero the mismatch chain") {
  const auto one = family(1, 67);
  const std::vector<TaskDataset> same{one[0], one[0], one[0], one[0]};
  const MlpModel base = base_net(10);
  const double alpha = 0.25;  // exactly 1/T in floating point
  TrainConfig cfg;
  cfg.eta = 0.05;
  cfg.alpha = alpha;
  cfg.epochs = 3;
  const Trajectory mt = train_multitask(base, same, cfg);
  for (std::size_t t = 0; t < same.size(); ++t) {
    CHECK(norm2(accum_p(t, base.arch, mt.checkpoints, 2, same, alpha)) == 0.0);
    CHECK(norm2(curvature_s(t, base.arch, mt.checkpoints, 1, same, alpha)) == 0.0);
  }
  const CurvatureTermConfig cfg_c{HessianAnchor::step_start, +1, AlphaFactor::one};
  CHECK(norm2(coefficient_C(base.arch, mt.checkpoints, 1, same, alpha, cfg_c)) == 0.0);
}

TEST_CASE("curvature_s matches a dense-hessian recomputation") {
  const auto tasks = family(2, 71, 25);
  const MlpModel base = base_net(11);
  const double alpha = 0.6;
  TrainConfig cfg;
  cfg.eta = 0.05;
  cfg.alpha = alpha;
  cfg.epochs = 3;
  const Trajectory mt = train_multitask(base, tasks, cfg);

  for (HessianAnchor anchor : {HessianAnchor::step_start, HessianAnchor::step_end}) {
    const ParamVector s = curvature_s(0, base.arch, mt.checkpoints, 1, tasks, alpha, anchor);
    ParamVector expected(base.arch.param_count(), 0.0);
    ParamVector p(base.arch.param_count(), 0.0);
    for (std::size_t j = 0; j <= 1; ++j) {
      const MlpModel mj = unflatten(base.arch, mt.checkpoints[j]);
      axpy(1.0, residual_r(0, mj, tasks, alpha), p);
      const std::size_t anchor_idx = anchor == HessianAnchor::step_end ? j + 1 : j;
      const MlpModel ma = unflatten(base.arch, mt.checkpoints[anchor_idx]);
      const FullHessian fh = full_hessian(ma, tasks[0]);
      std::vector<double> hp;
      matvec(fh.matrix, p, hp);
      axpy(1.0, hp, expected);
    }
    CHECK(norm2(subtract(s, expected)) <= 1e-10 * (1.0 + norm2(expected)));
  }

  CHECK_THROWS_AS(
      curvature_s(0, base.arch, mt.checkpoints, 5, tasks, alpha, HessianAnchor::step_end),
      std::invalid_argument);
}

TEST_CASE("coefficient_C degenerate cases and modulation") {
  const auto solo = family(1, 73);
  const MlpModel base = base_net(12);
  TrainConfig cfg;
  cfg.eta = 0.05;
  cfg.alpha = 1.0;
  cfg.epochs = 2;
  const Trajectory mt = train_multitask(base, solo, cfg);
  const CurvatureTermConfig plain{HessianAnchor::step_start, +1, AlphaFactor::one};
  CHECK(norm2(coefficient_C(base.arch, mt.checkpoints, 0, solo, 1.0, plain)) == 0.0);

  const auto tasks = family(3, 74);
  TrainConfig cfg2;
  cfg2.eta = 0.05;
  cfg2.alpha = 0.4;
  cfg2.epochs = 3;
  const Trajectory mt2 = train_multitask(base, tasks, cfg2);
  const ParamVector raw =
      coefficient_C(base.arch, mt2.checkpoints, 1, tasks, 0.4, plain);
  const CurvatureTermConfig modulated{HessianAnchor::step_start, -1, AlphaFactor::two_alpha};
  const ParamVector scaled_c =
      coefficient_C(base.arch, mt2.checkpoints, 1, tasks, 0.4, modulated);
  CHECK(norm2(subtract(scaled_c, scaled(raw, -0.8))) <= 1e-15 * norm2(raw));
  CHECK(modulated.factor(0.4) == Catch::Approx(-0.8));
}

TEST_CASE("first-epoch per-task displacement is eta times the mismatch") {
  const auto tasks = family(3, 79);
  const MlpModel base = base_net(13);
  const double alpha = 0.5;
  TrainConfig cfg;
  cfg.eta = 0.05;
  cfg.alpha = alpha;
  cfg.epochs = 1;
  const Trajectory mt = train_multitask(base, tasks, cfg);
  const double scale = 1.0 + norm2(flatten(base));
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const Trajectory ft = finetune(base, tasks[t], cfg);
    ParamVector lhs = subtract(ft.checkpoints[1], mt.checkpoints[1]);
    axpy(-cfg.eta, residual_r(t, base, tasks, alpha), lhs);
    CHECK(norm2(lhs) <= 1e-12 * scale);
  }
}

TEST_CASE("merged displacement matches the first-order gradient sum at order eta^2") {
  const auto tasks = family(3, 83);
  const MlpModel base = base_net(14);
  const double alpha = 0.5;
  const auto grid = geometric_grid(1e-2, 0.5, 6);
  std::vector<double> norms;
  for (double eta : grid) {
    TrainConfig cfg;
    cfg.eta = eta;
    cfg.alpha = alpha;
    cfg.epochs = 3;
    const Trajectory mt = train_multitask(base, tasks, cfg);
    std::vector<TaskVector> vectors;
    for (const auto& t : tasks) vectors.push_back(task_vector(finetune(base, t, cfg)));
    const MlpModel merged = merge_ta(base, vectors, alpha);
    ParamVector first_order(base.arch.param_count(), 0.0);
    for (std::size_t j = 0; j < cfg.epochs; ++j) {
      const MlpModel mj = unflatten(base.arch, mt.checkpoints[j]);
      for (const auto& t : tasks) axpy(-eta * alpha, grad(mj, t), first_order);
    }
    ParamVector lhs = subtract(flatten(merged), flatten(base));
    axpy(-1.0, first_order, lhs);
    norms.push_back(norm2(lhs));
  }
  const FitResult fit = fit_order(grid, norms);
  CHECK(fit.slope >= 1.9);
}
