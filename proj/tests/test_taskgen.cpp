#include <catch2/catch_amalgamated.hpp>

#include "tavlab/taskgen.hpp"
#include "tavlab/trainer.hpp"

using namespace tavlab;

TEST_CASE("make_task is deterministic in the seed") {
  const TaskDataset a = make_task(123, 50, 8, 3, 1.0, 4.0);
  const TaskDataset b = make_task(123, 50, 8, 3, 1.0, 4.0);
  CHECK(a.inputs == b.inputs);
  CHECK(a.labels == b.labels);
  CHECK(a.m_x_bound == b.m_x_bound);
  const TaskDataset c = make_task(124, 50, 8, 3, 1.0, 4.0);
  CHECK(a.inputs != c.inputs);
}

TEST_CASE("norm bound is enforced and tight") {
  const TaskDataset ds = make_task(9, 80, 8, 3, 1.0, 6.0);
  double max_norm = 0.0;
  for (const auto& x : ds.inputs) {
    double n = 0.0;
    for (double v : x) n += v * v;
    max_norm = std::max(max_norm, std::sqrt(n));
  }
  CHECK(max_norm <= 1.0 + 1e-12);
  CHECK(ds.m_x_bound == max_norm);  // recorded bound is the measured max
  CHECK(ds.m_x_bound >= 1.0 - 1e-12);  // separation 6 forces the rescale
  validate_dataset(ds);
}

TEST_CASE("labels are balanced within one sample") {
  for (std::size_t n : {30u, 31u, 32u}) {
    const TaskDataset ds = make_task(5, n, 4, 3, 2.0, 1.0);
    std::vector<std::size_t> counts(3, 0);
    for (int label : ds.labels) counts[label]++;
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    CHECK(*hi - *lo <= 1);
    validate_dataset(ds);
  }
}

TEST_CASE("make_task rejects invalid shapes") {
  CHECK_THROWS_AS(make_task(1, 10, 4, 1, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(make_task(1, 0, 4, 2, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(make_task(1, 10, 0, 2, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(make_task(1, 10, 4, 2, 1.0, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(make_task(1, 10, 4, 2, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("degenerate flag when a class has no sample") {
  const TaskDataset ds = make_task(2, 2, 4, 3, 1.0, 1.0);
  CHECK(ds.degenerate);
}

TEST_CASE("single-task family equals the standalone generator") {
  TaskFamilySpec spec;
  spec.count = 1;
  spec.samples = 40;
  spec.input_dim = 8;
  spec.classes = 3;
  spec.m_x = 1.0;
  spec.separation = 4.0;
  spec.relatedness = 0.0;
  const auto family = make_task_family(77, spec);
  const TaskDataset solo = make_task(77, 40, 8, 3, 1.0, 4.0);
  REQUIRE(family.size() == 1);
  CHECK(family[0].inputs == solo.inputs);
  CHECK(family[0].labels == solo.labels);
}

TEST_CASE("family tasks have distinct geometries") {
  TaskFamilySpec spec;
  spec.count = 3;
  spec.samples = 60;
  spec.input_dim = 8;
  spec.classes = 3;
  spec.m_x = 1.0;
  spec.separation = 4.0;
  for (double rho : {0.0, 0.85}) {
    spec.relatedness = rho;
    const auto family = make_task_family(31, spec);
    REQUIRE(family.size() == 3);
    for (std::size_t a = 0; a < 3; ++a) {
      validate_dataset(family[a]);
      for (std::size_t b = a + 1; b < 3; ++b) CHECK(family[a].inputs != family[b].inputs);
    }
    CHECK(family[0].task_id != family[1].task_id);
  }
  CHECK_THROWS_AS(make_task_family(1, TaskFamilySpec{.count = 0}),
                  std::invalid_argument);
}

TEST_CASE("validator catches corrupted datasets") {
  TaskDataset ds = make_task(15, 20, 4, 2, 1.0, 2.0);
  TaskDataset bad_norm = ds;
  bad_norm.inputs[0][0] += 10.0;
  CHECK_THROWS_AS(validate_dataset(bad_norm), std::invalid_argument);
  TaskDataset bad_label = ds;
  bad_label.labels[0] = 7;
  CHECK_THROWS_AS(validate_dataset(bad_label), std::invalid_argument);
  TaskDataset imbalanced = ds;
  for (auto& l : imbalanced.labels) l = 0;
  CHECK_THROWS_AS(validate_dataset(imbalanced), std::invalid_argument);
}

TEST_CASE("a separated task trains to high accuracy") {
  // Reference-run fixture: separation 8 with 200 samples is easily separable.
  const TaskDataset ds = make_task(11, 200, 8, 3, 1.0, 8.0);
  const MlpModel base = random_init({{8, 16, 3}, Activation::tanh, false}, 3);
  TrainConfig cfg;
  cfg.eta = 0.05;
  cfg.convergence_grad_tol = 1e-3;
  cfg.max_epochs_converged = 800;
  const Trajectory traj = train_to_convergence(base, ds, cfg);
  CHECK(accuracy(traj.final_model(), ds) >= 0.95);
}
