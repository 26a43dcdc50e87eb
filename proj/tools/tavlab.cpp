// tavlab: experiment driver.
//
// Subcommands regenerate everything they need from the config (datasets,
// base model), write their artifacts under <outdir>/<subcommand>/ together
// with a manifest carrying the effective config and its hash, and re-validate
// what they wrote before exiting. `validate` re-runs those checks against an
// existing artifact directory.
//
// Exit codes: 0 ok, 1 runtime/numerical failure, 2 config/schema violation.

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tavlab/tavlab.hpp"

namespace fs = std::filesystem;
using namespace tavlab;

namespace {

constexpr const char* kSubcommands[] = {"gen-tasks", "finetune", "merge",
                                        "gap-scan",  "bounds",   "dominance",
                                        "horizon",   "pca"};

struct Overrides {
  std::string config_path;
  std::optional<double> eta;
  std::optional<double> alpha;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> outdir;
};

ExperimentConfig load_config(const Overrides& ov) {
  const Json j = read_json_file(ov.config_path);
  ExperimentConfig cfg = config_from_json(j);
  if (ov.eta) cfg.train.eta = *ov.eta;
  if (ov.alpha) cfg.train.alpha = *ov.alpha;
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.outdir) cfg.output_dir = *ov.outdir;
  return cfg;
}

void write_manifest(const fs::path& dir, const std::string& sub,
                    const ExperimentConfig& cfg,
                    const std::vector<std::string>& artifacts) {
  Json m;
  m["subcommand"] = sub;
  m["version"] = kVersion;
  m["config_hash"] = config_hash(cfg);
  m["config"] = config_to_json(cfg);
  m["artifacts"] = artifacts;
  write_json_file(dir / "manifest.json", m);
}

// --- subcommand bodies -------------------------------------------------------

void run_gen_tasks(const Experiment& ex, const fs::path& dir) {
  std::vector<std::string> files;
  Json family;
  family["count"] = ex.tasks.size();
  Json ids = Json::array();
  for (std::size_t t = 0; t < ex.tasks.size(); ++t) {
    const std::string name = "task_" + std::to_string(t) + ".json";
    write_json_file(dir / name, dataset_to_json(ex.tasks[t]));
    files.push_back(name);
    ids.push_back(ex.tasks[t].task_id);
  }
  write_json_file(dir / "pretrain.json", dataset_to_json(ex.pretrain_task));
  files.push_back("pretrain.json");
  family["task_ids"] = std::move(ids);
  family["relatedness"] = ex.cfg.tasks.relatedness;
  write_json_file(dir / "family.json", family);
  files.push_back("family.json");
  write_manifest(dir, "gen-tasks", ex.cfg, files);
}

void run_finetune(const Experiment& ex, const fs::path& dir) {
  std::vector<std::string> files;
  write_json_file(dir / "base_model.json", model_to_json(ex.base));
  files.push_back("base_model.json");
  std::vector<Trajectory> trajectories(ex.tasks.size());
  parallel_for(ex.tasks.size(), [&](std::size_t t) {
    trajectories[t] = finetune(ex.base, ex.tasks[t], ex.cfg.train);
  });
  for (std::size_t t = 0; t < ex.tasks.size(); ++t) {
    const std::string sub = "task_" + std::to_string(t);
    write_trajectory(dir / sub, trajectories[t]);
    files.push_back(sub + "/trajectory.json");
    const TaskVector tv = task_vector(trajectories[t], ex.tasks[t].task_id);
    Json tj;
    tj["task_id"] = tv.task_id;
    tj["epochs"] = tv.epochs;
    tj["delta"] = tv.delta;
    const std::string vec_name = "task_vector_" + std::to_string(t) + ".json";
    write_json_file(dir / vec_name, tj);
    files.push_back(vec_name);
  }
  write_manifest(dir, "finetune", ex.cfg, files);
}

void run_merge(const Experiment& ex, const fs::path& dir) {
  std::vector<TaskVector> vectors(ex.tasks.size());
  parallel_for(ex.tasks.size(), [&](std::size_t t) {
    vectors[t] =
        task_vector(finetune(ex.base, ex.tasks[t], ex.cfg.train), ex.tasks[t].task_id);
  });
  const MlpModel merged = merge_ta(ex.base, vectors, ex.cfg.train.alpha);
  write_json_file(dir / "merged_model.json", model_to_json(merged));

  // One-epoch equality: merged one-step vectors against one joint step.
  TrainConfig one = ex.cfg.train;
  one.epochs = 1;
  std::vector<TaskVector> first(ex.tasks.size());
  parallel_for(ex.tasks.size(), [&](std::size_t t) {
    first[t] = task_vector(finetune(ex.base, ex.tasks[t], one), ex.tasks[t].task_id);
  });
  const MlpModel merged1 = merge_ta(ex.base, first, ex.cfg.train.alpha);
  const Trajectory mt1 = train_multitask(ex.base, ex.tasks, one);
  const double base_norm = norm2(flatten(ex.base));
  const double gap = norm2(subtract(flatten(merged1), mt1.final_params()));
  const double tolerance = 1e-12 * (1.0 + base_norm);
  Json eq;
  eq["alpha"] = ex.cfg.train.alpha;
  eq["eta"] = ex.cfg.train.eta;
  eq["base_norm"] = base_norm;
  eq["gap_norm"] = gap;
  eq["tolerance"] = tolerance;
  eq["pass"] = gap <= tolerance;
  write_json_file(dir / "equality.json", eq);
  write_manifest(dir, "merge", ex.cfg, {"merged_model.json", "equality.json"});
}

void run_gap_scan(const Experiment& ex, const fs::path& dir) {
  const std::vector<TaskDataset> subset(ex.tasks.begin(),
                                        ex.tasks.begin() + ex.cfg.analysis.gap_task_count);
  const GapReport report = gap_scan(ex.base, subset, ex.cfg.analysis.gap_epochs,
                                    ex.cfg.analysis.gap_alpha, ex.cfg.analysis.eta_grid());
  write_json_file(dir / "gap_scan.json", gap_report_to_json(report));
  write_csv_file(dir / "gap_scan.csv", gap_report_csv(report));

  const ExpansionReport expansion =
      expansion_scan(ex.base, subset, ex.cfg.analysis.gap_alpha,
                     ex.cfg.analysis.expansion_m_values, ex.cfg.analysis.eta_grid());
  write_json_file(dir / "expansion_scan.json", expansion_report_to_json(expansion));
  write_csv_file(dir / "expansion_scan.csv", expansion_report_csv(expansion));
  write_manifest(dir, "gap-scan", ex.cfg,
                 {"gap_scan.json", "gap_scan.csv", "expansion_scan.json", "expansion_scan.csv"});
}

void run_bounds(const Experiment& ex, const fs::path& dir) {
  std::vector<std::string> files;
  for (const std::string& act_name : ex.cfg.analysis.bounds_activations) {
    MlpArchitecture arch = ex.cfg.arch;
    arch.activation = parse_activation(act_name);
    ExperimentConfig variant_cfg = ex.cfg;
    variant_cfg.arch = arch;
    const Experiment variant = build_experiment(variant_cfg);
    const std::vector<TaskDataset> subset(
        variant.tasks.begin(), variant.tasks.begin() + ex.cfg.analysis.bounds_task_count);
    TrainConfig cfg = ex.cfg.train;
    cfg.epochs = ex.cfg.analysis.bounds_epochs;
    const Trajectory mt = train_multitask(variant.base, subset, cfg);
    std::vector<Trajectory> singles(subset.size());
    parallel_for(subset.size(), [&](std::size_t t) {
      singles[t] = finetune(variant.base, subset[t], cfg);
    });
    const BoundReport report = certify_bounds(arch, mt, singles, subset,
                                               cfg.alpha, ex.cfg.analysis.bounds_h);
    write_json_file(dir / ("bounds_" + act_name + ".json"), bound_report_to_json(report));
    write_csv_file(dir / ("bounds_" + act_name + ".csv"), bound_report_csv(report));
    files.push_back("bounds_" + act_name + ".json");
    files.push_back("bounds_" + act_name + ".csv");
  }
  write_manifest(dir, "bounds", ex.cfg, files);
}

void run_dominance(const Experiment& ex, const fs::path& dir) {
  const DominanceReport report = dominance_experiment(
      ex.base, ex.tasks, ex.cfg.train.eta, ex.cfg.analysis.dominance_epochs);
  write_json_file(dir / "dominance.json", dominance_report_to_json(report));
  write_csv_file(dir / "dominance.csv", dominance_csv(report));
  write_csv_file(dir / "cosine.csv", cosine_csv(report));
  write_manifest(dir, "dominance", ex.cfg,
                 {"dominance.json", "dominance.csv", "cosine.csv"});
}

void run_horizon(const Experiment& ex, const fs::path& dir) {
  HorizonConfig cfg;
  cfg.eta = ex.cfg.train.eta;
  cfg.convergence_grad_tol = *ex.cfg.train.convergence_grad_tol;
  cfg.max_epochs_converged = ex.cfg.train.max_epochs_converged;
  cfg.alpha_grid = ex.cfg.analysis.horizon_alpha_grid;
  const HorizonReport report = merge_horizon_experiment(ex.base, ex.tasks, cfg);
  write_json_file(dir / "horizon.json", horizon_report_to_json(report));
  write_csv_file(dir / "horizon.csv", horizon_csv(report));
  write_manifest(dir, "horizon", ex.cfg, {"horizon.json", "horizon.csv"});
}

void run_pca(const Experiment& ex, const fs::path& dir) {
  const Trajectory iter =
      iterative_ta(ex.base, ex.tasks, ex.cfg.analysis.pca_rounds,
                   ex.cfg.analysis.pca_epochs_per_round, ex.cfg.train);
  TrainConfig joint_cfg = ex.cfg.train;
  joint_cfg.epochs = ex.cfg.analysis.pca_rounds * ex.cfg.analysis.pca_epochs_per_round;
  const Trajectory joint = train_multitask(ex.base, ex.tasks, joint_cfg);

  std::vector<ParamVector> stack;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < iter.checkpoints.size(); ++i) {
    stack.push_back(iter.checkpoints[i]);
    labels.push_back(i == 0 ? "base" : "merge_round_" + std::to_string(i));
  }
  for (std::size_t i = 1; i < joint.checkpoints.size(); ++i) {
    stack.push_back(joint.checkpoints[i]);
    labels.push_back("joint_epoch_" + std::to_string(i));
  }
  const PcaProjection proj = pca_project(stack);
  write_json_file(dir / "pca.json", pca_to_json(proj, labels));
  write_csv_file(dir / "pca.csv", pca_csv(proj, labels));
  write_manifest(dir, "pca", ex.cfg, {"pca.json", "pca.csv"});
}

// --- validation ---------------------------------------------------------------

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string message;
};

void add_check(std::vector<CheckResult>& out, const std::string& name, bool pass,
               const std::string& message = "") {
  out.push_back({name, pass, message});
}

template <class Fn>
void guarded_check(std::vector<CheckResult>& out, const std::string& name, Fn&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    add_check(out, name, false, e.what());
  }
}

bool fits_match(const FitResult& a, const Json& stored) {
  return std::abs(a.slope - stored.at("slope").get<double>()) <= 1e-9 &&
         std::abs(a.intercept - stored.at("intercept").get<double>()) <= 1e-9 &&
         std::abs(a.r2 - stored.at("r2").get<double>()) <= 1e-9;
}

std::vector<double> json_norms(const Json& arr) {
  std::vector<double> out;
  for (const Json& v : arr)
    out.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN()
                              : v.get<double>());
  return out;
}

void validate_manifest(const fs::path& dir, std::vector<CheckResult>& out) {
  const std::string name = dir.filename().string() + ": manifest";
  guarded_check(out, name, [&] {
    const Json m = read_json_file(dir / "manifest.json");
    const ExperimentConfig cfg = config_from_json(m.at("config"));
    const bool hash_ok = config_hash(cfg) == m.at("config_hash").get<std::string>();
    bool files_ok = true;
    std::string missing;
    for (const Json& f : m.at("artifacts"))
      if (!fs::exists(dir / f.get<std::string>())) {
        files_ok = false;
        missing = f.get<std::string>();
      }
    add_check(out, name, hash_ok && files_ok,
              !hash_ok ? "config hash mismatch"
                       : (files_ok ? "" : "missing artifact " + missing));
  });
}

void validate_gen_tasks(const fs::path& dir, std::vector<CheckResult>& out) {
  guarded_check(out, "gen-tasks: datasets", [&] {
    const Json m = read_json_file(dir / "manifest.json");
    const ExperimentConfig cfg = config_from_json(m.at("config"));
    for (std::size_t t = 0; t < cfg.tasks.count; ++t) {
      const TaskDataset ds =
          dataset_from_json(read_json_file(dir / ("task_" + std::to_string(t) + ".json")));
      validate_dataset(ds);
      if (ds.m_x_bound > cfg.tasks.m_x * (1.0 + 1e-12))
        throw std::runtime_error("task " + std::to_string(t) + " exceeds requested m_x");
    }
    validate_dataset(dataset_from_json(read_json_file(dir / "pretrain.json")));
    add_check(out, "gen-tasks: datasets", true);
  });
}

void validate_finetune(const fs::path& dir, std::vector<CheckResult>& out) {
  guarded_check(out, "finetune: replay", [&] {
    const Json m = read_json_file(dir / "manifest.json");
    const Experiment ex = build_experiment(config_from_json(m.at("config")));
    const MlpModel base = model_from_json(read_json_file(dir / "base_model.json"));
    if (flatten(base) != flatten(ex.base))
      throw std::runtime_error("stored base model differs from the config's base");
    for (std::size_t t = 0; t < ex.tasks.size(); ++t) {
      const Trajectory traj = read_trajectory(dir / ("task_" + std::to_string(t)));
      for (std::size_t j = 0; j + 1 < traj.checkpoints.size(); ++j) {
        MlpModel step = unflatten(traj.arch, traj.checkpoints[j]);
        const LossGrad lg = loss_and_grad(step, ex.tasks[t]);
        param_axpy(step, -traj.step_size, lg.grad);
        if (flatten(step) != traj.checkpoints[j + 1])
          throw std::runtime_error("task " + std::to_string(t) + " step " +
                                   std::to_string(j) + " does not replay bit-exactly");
      }
    }
    add_check(out, "finetune: replay", true);
  });
}

void validate_merge(const fs::path& dir, std::vector<CheckResult>& out) {
  guarded_check(out, "merge: one-epoch equality", [&] {
    const Json eq = read_json_file(dir / "equality.json");
    const bool ok = eq.at("gap_norm").get<double>() <= eq.at("tolerance").get<double>() &&
                    eq.at("pass").get<bool>();
    add_check(out, "merge: one-epoch equality", ok,
              ok ? "" : "gap exceeds tolerance");
  });
}

void validate_gap_scan(const fs::path& dir, std::vector<CheckResult>& out) {
  guarded_check(out, "gap-scan: fits", [&] {
    const Json j = read_json_file(dir / "gap_scan.json");
    const auto grid = j.at("eta_grid").get<std::vector<double>>();
    for (std::size_t i = 1; i < grid.size(); ++i)
      if (!(grid[i] < grid[i - 1]))
        throw std::runtime_error("eta grid is not strictly decreasing");
    const double floor = j.at("noise_floor").get<double>();
    if (!j.at("raw_fit").is_null()) {
      const FitResult fit = fit_order(grid, json_norms(j.at("gap_norms")), floor);
      if (!std::isfinite(fit.slope) || !fits_match(fit, j.at("raw_fit")))
        throw std::runtime_error("stored raw fit does not match the stored norms");
    }
    for (const Json& cand : j.at("candidates")) {
      if (cand.at("fit").is_null()) continue;
      const FitResult fit = fit_order(grid, json_norms(cand.at("residual_norms")), floor);
      if (!std::isfinite(fit.slope) || !fits_match(fit, cand.at("fit")))
        throw std::runtime_error("stored candidate fit does not match its norms: " +
                                 cand.at("name").get<std::string>());
    }
    add_check(out, "gap-scan: fits", true);
  });
}

void validate_bounds(const fs::path& dir, std::vector<CheckResult>& out) {
  guarded_check(out, "bounds: ratios", [&] {
    const Json m = read_json_file(dir / "manifest.json");
    bool all_ok = true;
    std::string detail;
    for (const Json& f : m.at("artifacts")) {
      const std::string name = f.get<std::string>();
      if (name.find(".json") == std::string::npos || name == "manifest.json") continue;
      const Json j = read_json_file(dir / name);
      const Json& ratios = j.at("ratios");
      for (const auto& [key, value] : ratios.items())
        if (!(value.get<double>() <= 1.0 + 1e-9)) {
          all_ok = false;
          detail = name + " ratio " + key + " = " + format_double(value.get<double>());
        }
      const double lmax = j.at("measured").at("softmax_lambda_max").get<double>();
      if (!(lmax <= 0.5 + 1e-12)) {
        all_ok = false;
        detail = name + " softmax lambda_max = " + format_double(lmax);
      }
    }
    add_check(out, "bounds: ratios", all_ok, detail);
  });
}

void validate_dominance(const fs::path& dir, std::vector<CheckResult>& out) {
  guarded_check(out, "dominance: sums and symmetry", [&] {
    const Json j = read_json_file(dir / "dominance.json");
    for (const Json& task : j.at("tasks")) {
      double sum = 0.0;
      for (const Json& v : task.at("normalized_grad_norms")) sum += v.get<double>();
      if (std::abs(sum - 1.0) > 1e-12)
        throw std::runtime_error(task.at("task_id").get<std::string>() +
                                 ": normalized norms sum to " + format_double(sum));
      const Json& cm = task.at("cosine_matrix");
      for (std::size_t r = 0; r < cm.size(); ++r) {
        if (cm[r][r].get<double>() != 1.0)
          throw std::runtime_error("cosine diagonal is not exactly 1");
        for (std::size_t c = 0; c < cm.size(); ++c) {
          if (cm[r][c].is_null() != cm[c][r].is_null())
            throw std::runtime_error("cosine matrix asymmetric nulls");
          if (!cm[r][c].is_null() &&
              cm[r][c].get<double>() != cm[c][r].get<double>())
            throw std::runtime_error("cosine matrix not symmetric");
        }
      }
    }
    add_check(out, "dominance: sums and symmetry", true);
  });
}

void validate_horizon(const fs::path& dir, std::vector<CheckResult>& out) {
  guarded_check(out, "horizon: accuracies", [&] {
    const Json m = read_json_file(dir / "manifest.json");
    const ExperimentConfig cfg = config_from_json(m.at("config"));
    const Json j = read_json_file(dir / "horizon.json");
    const double natural = 1.0 / static_cast<double>(cfg.tasks.count);
    bool has_natural = false;
    for (const Json& a : j.at("alpha_grid"))
      if (std::abs(a.get<double>() - natural) <= 1e-12) has_natural = true;
    if (!has_natural) throw std::runtime_error("alpha grid lacks 1/T");
    for (const char* arm : {"one_epoch", "converged"})
      for (const Json& e : j.at(arm).at("entries"))
        for (const Json& acc : e.at("task_accuracy")) {
          const double a = acc.get<double>();
          if (!(a >= 0.0 && a <= 1.0))
            throw std::runtime_error("accuracy out of [0,1]");
        }
    add_check(out, "horizon: accuracies", true);
  });
}

void validate_pca(const fs::path& dir, std::vector<CheckResult>& out) {
  guarded_check(out, "pca: explained variance", [&] {
    const Json j = read_json_file(dir / "pca.json");
    const auto ev = j.at("explained_variance").get<std::vector<double>>();
    if (ev.size() != 2 || ev[0] < 0.0 || ev[1] < 0.0 || ev[0] > 1.0 + 1e-9 ||
        ev[1] > 1.0 + 1e-9 || ev[0] + ev[1] > 1.0 + 1e-9)
      throw std::runtime_error("explained variance outside [0,1]");
    add_check(out, "pca: explained variance", true);
  });
}

std::vector<CheckResult> validate_artifacts(const fs::path& root,
                                            const std::set<std::string>& only = {}) {
  std::vector<CheckResult> out;
  bool any = false;
  for (const char* sub : kSubcommands) {
    if (!only.empty() && !only.count(sub)) continue;
    const fs::path dir = root / sub;
    if (!fs::exists(dir / "manifest.json")) continue;
    any = true;
    validate_manifest(dir, out);
    const std::string name = sub;
    if (name == "gen-tasks") validate_gen_tasks(dir, out);
    if (name == "finetune") validate_finetune(dir, out);
    if (name == "merge") validate_merge(dir, out);
    if (name == "gap-scan") validate_gap_scan(dir, out);
    if (name == "bounds") validate_bounds(dir, out);
    if (name == "dominance") validate_dominance(dir, out);
    if (name == "horizon") validate_horizon(dir, out);
    if (name == "pca") validate_pca(dir, out);
  }
  if (!any) add_check(out, "artifacts", false, "no artifacts in " + root.string());
  return out;
}

int report_checks(const std::vector<CheckResult>& checks) {
  int failures = 0;
  for (const CheckResult& c : checks) {
    std::cout << (c.pass ? "[PASS] " : "[FAIL] ") << c.name;
    if (!c.message.empty()) std::cout << " (" << c.message << ")";
    std::cout << "\n";
    if (!c.pass) ++failures;
  }
  std::cout << (failures == 0 ? "validation passed" : "validation FAILED") << " ("
            << checks.size() - failures << "/" << checks.size() << " checks)\n";
  return failures == 0 ? 0 : 1;
}

int run_subcommands(const Overrides& ov, const std::vector<std::string>& subs) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(ov);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  try {
    const Experiment ex = build_experiment(cfg);
    const fs::path root = cfg.output_dir;
    std::set<std::string> ran;
    for (const std::string& sub : subs) {
      const fs::path dir = root / sub;
      fs::create_directories(dir);
      if (sub == "gen-tasks") run_gen_tasks(ex, dir);
      else if (sub == "finetune") run_finetune(ex, dir);
      else if (sub == "merge") run_merge(ex, dir);
      else if (sub == "gap-scan") run_gap_scan(ex, dir);
      else if (sub == "bounds") run_bounds(ex, dir);
      else if (sub == "dominance") run_dominance(ex, dir);
      else if (sub == "horizon") run_horizon(ex, dir);
      else if (sub == "pca") run_pca(ex, dir);
      else throw std::logic_error("unknown subcommand " + sub);
      ran.insert(sub);
      std::cout << "wrote " << dir.string() << "\n";
    }
    return report_checks(validate_artifacts(root, ran));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"task-vector / gradient-descent verification lab"};
  app.require_subcommand(1);

  Overrides ov;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", ov.config_path, "experiment config (JSON)")->required();
    sub->add_option("--eta", ov.eta, "override train.eta");
    sub->add_option("--alpha", ov.alpha, "override train.alpha");
    sub->add_option("--seed", ov.seed, "override seed");
    sub->add_option("--outdir", ov.outdir, "override output_dir");
  };

  std::vector<std::pair<CLI::App*, std::vector<std::string>>> runs;
  for (const char* name : kSubcommands) {
    CLI::App* sub = app.add_subcommand(name, std::string("run the ") + name + " experiment");
    add_common(sub);
    runs.push_back({sub, {name}});
  }
  CLI::App* all = app.add_subcommand("all", "run every experiment");
  add_common(all);
  runs.push_back({all, {std::begin(kSubcommands), std::end(kSubcommands)}});

  std::string validate_dir;
  CLI::App* validate = app.add_subcommand("validate", "re-check an artifact directory");
  validate->add_option("dir", validate_dir, "artifact directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (validate->parsed()) {
    try {
      return report_checks(validate_artifacts(validate_dir));
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
  }
  for (const auto& [sub, names] : runs)
    if (sub->parsed()) return run_subcommands(ov, names);
  return 2;
}
