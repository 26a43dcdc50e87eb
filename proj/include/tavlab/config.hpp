// Experiment configuration: a schema-checked JSON record that fully
// determines a run. Canonical re-serialization feeds the config hash in every
// artifact manifest.
#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tavlab/analysis.hpp"
#include "tavlab/io.hpp"
#include "tavlab/network.hpp"
#include "tavlab/taskgen.hpp"
#include "tavlab/trainer.hpp"

namespace tavlab {

constexpr int kConfigSchemaVersion = 1;

struct ConfigError : std::runtime_error {
  std::string field_path;
  ConfigError(const std::string& path, const std::string& what)
      : std::runtime_error("config field '" + path + "': " + what), field_path(path) {}
};

struct BaseSpec {
  double init_scale = 1.0;
  bool pretrain = true;
  double pretrain_eta = 0.25;
  double pretrain_grad_tol = 0.01;
  std::size_t pretrain_max_epochs = 2000;
};

struct AnalysisSpec {
  double eta_grid_start = 1e-2;
  double eta_grid_factor = 0.5;
  std::size_t eta_grid_points = 6;
  std::size_t gap_epochs = 3;
  std::size_t gap_task_count = 3;
  double gap_alpha = 0.5;
  std::vector<std::size_t> expansion_m_values = {1, 2};
  std::size_t dominance_epochs = 10;
  std::size_t bounds_h = 1;
  std::size_t bounds_epochs = 5;
  std::size_t bounds_task_count = 3;
  std::vector<std::string> bounds_activations = {"tanh", "sigmoid"};
  std::vector<double> horizon_alpha_grid = {0.1, 0.2, 0.3, 0.5, 0.7, 1.0};
  std::size_t pca_rounds = 8;
  std::size_t pca_epochs_per_round = 1;

  std::vector<double> eta_grid() const {
    return geometric_grid(eta_grid_start, eta_grid_factor, eta_grid_points);
  }
};

struct ExperimentConfig {
  std::uint64_t seed = 42;
  MlpArchitecture arch;
  TaskFamilySpec tasks;
  BaseSpec base;
  TrainConfig train;
  AnalysisSpec analysis;
  std::string output_dir = "out";
};

namespace detail {

inline const Json& require_field(const Json& j, const std::string& parent,
                                 const std::string& key) {
  if (!j.is_object()) throw ConfigError(parent, "expected an object");
  auto it = j.find(key);
  if (it == j.end())
    throw ConfigError(parent.empty() ? key : parent + "." + key, "missing");
  return *it;
}

inline std::string join_path(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

inline double get_number(const Json& j, const std::string& parent, const std::string& key) {
  const Json& v = require_field(j, parent, key);
  if (!v.is_number()) throw ConfigError(join_path(parent, key), "expected a number");
  return v.get<double>();
}

inline bool is_count(const Json& v) {
  return v.is_number_unsigned() ||
         (v.is_number_integer() && v.get<long long>() >= 0);
}

inline std::size_t get_count(const Json& j, const std::string& parent,
                             const std::string& key) {
  const Json& v = require_field(j, parent, key);
  if (!is_count(v))
    throw ConfigError(join_path(parent, key), "expected a non-negative integer");
  return v.get<std::size_t>();
}

inline bool get_bool(const Json& j, const std::string& parent, const std::string& key) {
  const Json& v = require_field(j, parent, key);
  if (!v.is_boolean()) throw ConfigError(join_path(parent, key), "expected a boolean");
  return v.get<bool>();
}

inline std::string get_string(const Json& j, const std::string& parent,
                              const std::string& key) {
  const Json& v = require_field(j, parent, key);
  if (!v.is_string()) throw ConfigError(join_path(parent, key), "expected a string");
  return v.get<std::string>();
}

}  // namespace detail

inline ExperimentConfig config_from_json(const Json& j) {
  using detail::get_bool;
  using detail::get_count;
  using detail::get_number;
  using detail::get_string;
  using detail::require_field;

  ExperimentConfig cfg;
  if (get_count(j, "", "schema_version") != static_cast<std::size_t>(kConfigSchemaVersion))
    throw ConfigError("schema_version", "unsupported version");
  cfg.seed = require_field(j, "", "seed").get<std::uint64_t>();

  const Json& arch = require_field(j, "", "arch");
  cfg.arch.layer_dims.clear();
  const Json& dims = require_field(arch, "arch", "dims");
  if (!dims.is_array() || dims.size() < 2)
    throw ConfigError("arch.dims", "expected an array of at least 2 dimensions");
  for (const Json& d : dims) {
    if (!detail::is_count(d) || d.get<std::size_t>() == 0)
      throw ConfigError("arch.dims", "dimensions must be positive integers");
    cfg.arch.layer_dims.push_back(d.get<std::size_t>());
  }
  try {
    cfg.arch.activation = parse_activation(get_string(arch, "arch", "activation"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("arch.activation", e.what());
  }
  cfg.arch.bias_enabled = get_bool(arch, "arch", "bias");

  const Json& tasks = require_field(j, "", "tasks");
  cfg.tasks.count = get_count(tasks, "tasks", "count");
  cfg.tasks.samples = get_count(tasks, "tasks", "samples");
  cfg.tasks.input_dim = get_count(tasks, "tasks", "input_dim");
  cfg.tasks.classes = get_count(tasks, "tasks", "classes");
  cfg.tasks.m_x = get_number(tasks, "tasks", "m_x");
  cfg.tasks.separation = get_number(tasks, "tasks", "separation");
  cfg.tasks.relatedness = get_number(tasks, "tasks", "relatedness");
  if (cfg.tasks.count == 0) throw ConfigError("tasks.count", "must be >= 1");
  if (cfg.tasks.classes < 2) throw ConfigError("tasks.classes", "must be >= 2");
  if (cfg.tasks.relatedness < 0.0 || cfg.tasks.relatedness > 1.0)
    throw ConfigError("tasks.relatedness", "must lie in [0, 1]");
  if (cfg.tasks.input_dim != cfg.arch.layer_dims.front())
    throw ConfigError("tasks.input_dim", "must equal arch.dims[0]");
  if (cfg.tasks.classes != cfg.arch.layer_dims.back())
    throw ConfigError("tasks.classes", "must equal the last arch dimension");

  const Json& base = require_field(j, "", "base");
  cfg.base.init_scale = get_number(base, "base", "init_scale");
  cfg.base.pretrain = get_bool(base, "base", "pretrain");
  cfg.base.pretrain_eta = get_number(base, "base", "pretrain_eta");
  cfg.base.pretrain_grad_tol = get_number(base, "base", "pretrain_grad_tol");
  cfg.base.pretrain_max_epochs = get_count(base, "base", "pretrain_max_epochs");

  const Json& train = require_field(j, "", "train");
  cfg.train.eta = get_number(train, "train", "eta");
  cfg.train.alpha = get_number(train, "train", "alpha");
  cfg.train.epochs = get_count(train, "train", "epochs");
  cfg.train.convergence_grad_tol = get_number(train, "train", "convergence_grad_tol");
  cfg.train.max_epochs_converged = get_count(train, "train", "max_epochs_converged");
  if (!(cfg.train.eta > 0.0)) throw ConfigError("train.eta", "must be > 0");
  if (cfg.train.epochs < 1) throw ConfigError("train.epochs", "must be >= 1");

  const Json& an = require_field(j, "", "analysis");
  const Json& grid = require_field(an, "analysis", "eta_grid");
  cfg.analysis.eta_grid_start = get_number(grid, "analysis.eta_grid", "start");
  cfg.analysis.eta_grid_factor = get_number(grid, "analysis.eta_grid", "factor");
  cfg.analysis.eta_grid_points = get_count(grid, "analysis.eta_grid", "points");
  if (!(cfg.analysis.eta_grid_start > 0.0))
    throw ConfigError("analysis.eta_grid.start", "must be > 0");
  if (!(cfg.analysis.eta_grid_factor > 0.0 && cfg.analysis.eta_grid_factor < 1.0))
    throw ConfigError("analysis.eta_grid.factor", "must lie in (0, 1)");
  if (cfg.analysis.eta_grid_points < 5)
    throw ConfigError("analysis.eta_grid.points", "must be >= 5");
  cfg.analysis.gap_epochs = get_count(an, "analysis", "gap_epochs");
  cfg.analysis.gap_task_count = get_count(an, "analysis", "gap_task_count");
  cfg.analysis.gap_alpha = get_number(an, "analysis", "gap_alpha");
  if (cfg.analysis.gap_task_count == 0 || cfg.analysis.gap_task_count > cfg.tasks.count)
    throw ConfigError("analysis.gap_task_count", "must lie in [1, tasks.count]");
  {
    const Json& mv = detail::require_field(an, "analysis", "expansion_m_values");
    if (!mv.is_array() || mv.empty())
      throw ConfigError("analysis.expansion_m_values", "expected a non-empty array");
    cfg.analysis.expansion_m_values.clear();
    for (const Json& m : mv) {
      if (!detail::is_count(m) || m.get<std::size_t>() < 1)
        throw ConfigError("analysis.expansion_m_values", "entries must be integers >= 1");
      cfg.analysis.expansion_m_values.push_back(m.get<std::size_t>());
    }
  }
  cfg.analysis.dominance_epochs = get_count(an, "analysis", "dominance_epochs");
  if (cfg.analysis.dominance_epochs < 1)
    throw ConfigError("analysis.dominance_epochs", "must be >= 1");
  cfg.analysis.bounds_h = get_count(an, "analysis", "bounds_h");
  cfg.analysis.bounds_epochs = get_count(an, "analysis", "bounds_epochs");
  cfg.analysis.bounds_task_count = get_count(an, "analysis", "bounds_task_count");
  if (cfg.analysis.bounds_task_count == 0 ||
      cfg.analysis.bounds_task_count > cfg.tasks.count)
    throw ConfigError("analysis.bounds_task_count", "must lie in [1, tasks.count]");
  if (cfg.analysis.bounds_epochs < cfg.analysis.bounds_h + 2)
    throw ConfigError("analysis.bounds_epochs", "must be >= bounds_h + 2");
  {
    const Json& acts = detail::require_field(an, "analysis", "bounds_activations");
    if (!acts.is_array() || acts.empty())
      throw ConfigError("analysis.bounds_activations", "expected a non-empty array");
    cfg.analysis.bounds_activations.clear();
    for (const Json& a : acts) {
      if (!a.is_string())
        throw ConfigError("analysis.bounds_activations", "entries must be strings");
      try {
        parse_activation(a.get<std::string>());
      } catch (const std::invalid_argument& e) {
        throw ConfigError("analysis.bounds_activations", e.what());
      }
      cfg.analysis.bounds_activations.push_back(a.get<std::string>());
    }
  }
  {
    const Json& ag = detail::require_field(an, "analysis", "horizon_alpha_grid");
    if (!ag.is_array() || ag.empty())
      throw ConfigError("analysis.horizon_alpha_grid", "expected a non-empty array");
    cfg.analysis.horizon_alpha_grid.clear();
    for (const Json& a : ag) {
      if (!a.is_number() || !(a.get<double>() > 0.0))
        throw ConfigError("analysis.horizon_alpha_grid", "entries must be > 0");
      cfg.analysis.horizon_alpha_grid.push_back(a.get<double>());
    }
  }
  cfg.analysis.pca_rounds = get_count(an, "analysis", "pca_rounds");
  cfg.analysis.pca_epochs_per_round = get_count(an, "analysis", "pca_epochs_per_round");
  if (cfg.analysis.pca_rounds < 2)
    throw ConfigError("analysis.pca_rounds", "must be >= 2");
  if (cfg.analysis.pca_epochs_per_round < 1)
    throw ConfigError("analysis.pca_epochs_per_round", "must be >= 1");

  // Where artifacts land is not part of the experiment's identity; it is
  // optional here and excluded from the canonical form below.
  if (j.contains("output_dir")) {
    if (!j.at("output_dir").is_string())
      throw ConfigError("output_dir", "expected a string");
    cfg.output_dir = j.at("output_dir").get<std::string>();
  }
  return cfg;
}

inline Json config_to_json(const ExperimentConfig& cfg) {
  Json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["seed"] = cfg.seed;
  Json arch;
  arch["dims"] = cfg.arch.layer_dims;
  arch["activation"] = activation_name(cfg.arch.activation);
  arch["bias"] = cfg.arch.bias_enabled;
  j["arch"] = std::move(arch);
  Json tasks;
  tasks["count"] = cfg.tasks.count;
  tasks["samples"] = cfg.tasks.samples;
  tasks["input_dim"] = cfg.tasks.input_dim;
  tasks["classes"] = cfg.tasks.classes;
  tasks["m_x"] = cfg.tasks.m_x;
  tasks["separation"] = cfg.tasks.separation;
  tasks["relatedness"] = cfg.tasks.relatedness;
  j["tasks"] = std::move(tasks);
  Json base;
  base["init_scale"] = cfg.base.init_scale;
  base["pretrain"] = cfg.base.pretrain;
  base["pretrain_eta"] = cfg.base.pretrain_eta;
  base["pretrain_grad_tol"] = cfg.base.pretrain_grad_tol;
  base["pretrain_max_epochs"] = cfg.base.pretrain_max_epochs;
  j["base"] = std::move(base);
  Json train;
  train["eta"] = cfg.train.eta;
  train["alpha"] = cfg.train.alpha;
  train["epochs"] = cfg.train.epochs;
  train["convergence_grad_tol"] = *cfg.train.convergence_grad_tol;
  train["max_epochs_converged"] = cfg.train.max_epochs_converged;
  j["train"] = std::move(train);
  Json an;
  Json grid;
  grid["start"] = cfg.analysis.eta_grid_start;
  grid["factor"] = cfg.analysis.eta_grid_factor;
  grid["points"] = cfg.analysis.eta_grid_points;
  an["eta_grid"] = std::move(grid);
  an["gap_epochs"] = cfg.analysis.gap_epochs;
  an["gap_task_count"] = cfg.analysis.gap_task_count;
  an["gap_alpha"] = cfg.analysis.gap_alpha;
  an["expansion_m_values"] = cfg.analysis.expansion_m_values;
  an["dominance_epochs"] = cfg.analysis.dominance_epochs;
  an["bounds_h"] = cfg.analysis.bounds_h;
  an["bounds_epochs"] = cfg.analysis.bounds_epochs;
  an["bounds_task_count"] = cfg.analysis.bounds_task_count;
  an["bounds_activations"] = cfg.analysis.bounds_activations;
  an["horizon_alpha_grid"] = cfg.analysis.horizon_alpha_grid;
  an["pca_rounds"] = cfg.analysis.pca_rounds;
  an["pca_epochs_per_round"] = cfg.analysis.pca_epochs_per_round;
  j["analysis"] = std::move(an);
  return j;
}

inline std::string config_hash(const ExperimentConfig& cfg) {
  return fnv1a64_hex(config_to_json(cfg).dump());
}

// The deterministic world a config describes: the task family, the shared
// pretraining dataset, and the (optionally pretrained) base model.
struct Experiment {
  ExperimentConfig cfg;
  std::vector<TaskDataset> tasks;
  TaskDataset pretrain_task;
  MlpModel base;
  Trajectory pretrain_trajectory;  // empty checkpoints when pretraining is off
};

inline Experiment build_experiment(const ExperimentConfig& cfg) {
  Experiment ex;
  ex.cfg = cfg;
  ex.tasks = make_task_family(cfg.seed, cfg.tasks);
  ex.pretrain_task = make_pretrain_task(cfg.seed, cfg.tasks);
  MlpModel init = random_init(cfg.arch, mix_seed(cfg.seed, 0x171), cfg.base.init_scale);
  if (cfg.base.pretrain) {
    TrainConfig pt;
    pt.eta = cfg.base.pretrain_eta;
    pt.convergence_grad_tol = cfg.base.pretrain_grad_tol;
    pt.max_epochs_converged = cfg.base.pretrain_max_epochs;
    ex.pretrain_trajectory = train_to_convergence(init, ex.pretrain_task, pt);
    ex.base = ex.pretrain_trajectory.final_model();
  } else {
    ex.base = std::move(init);
  }
  return ex;
}

}  // namespace tavlab
