// Minimal tour: build a task family, finetune, merge, and check the
// one-epoch identity and the eta^2 scaling of the multi-epoch gap.
#include <cstdio>

#include "tavlab/tavlab.hpp"

int main() {
  using namespace tavlab;

  TaskFamilySpec spec;
  spec.count = 3;
  spec.samples = 60;
  spec.input_dim = 8;
  spec.classes = 3;
  spec.m_x = 1.0;
  spec.separation = 3.0;
  const auto tasks = make_task_family(7, spec);
  const MlpModel base = random_init({{8, 16, 3}, Activation::tanh, false}, 1);

  const double alpha = 0.5;
  TrainConfig cfg;
  cfg.eta = 0.01;
  cfg.alpha = alpha;
  cfg.epochs = 1;

  std::vector<TaskVector> vectors;
  for (const auto& t : tasks)
    vectors.push_back(task_vector(finetune(base, t, cfg), t.task_id));
  const MlpModel merged = merge_ta(base, vectors, alpha);
  const Trajectory joint = train_multitask(base, tasks, cfg);
  std::printf("one-epoch merge vs one joint step: gap %.3e\n",
              norm2(subtract(flatten(merged), joint.final_params())));

  const GapReport report =
      gap_scan(base, tasks, 3, alpha, geometric_grid(1e-2, 0.5, 6));
  std::printf("three-epoch gap order: slope %.3f (r2 %.6f)\n",
              report.raw_fit->slope, report.raw_fit->r2);
  if (report.selected_candidate) {
    const GapCandidate& best = report.candidates[*report.selected_candidate];
    std::printf("corrected residual order: slope %.3f with %s\n",
                best.fit->slope, best.config.name().c_str());
  }
  return 0;
}
