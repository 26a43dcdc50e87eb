// JSON / CSV persistence. All artifacts are plain text; doubles serialize as
// shortest round-trip decimals, files carry no timestamps, and key order is
// fixed, so identical runs produce byte-identical payloads.
#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "tavlab/analysis.hpp"
#include "tavlab/network.hpp"
#include "tavlab/taskgen.hpp"
#include "tavlab/trainer.hpp"

namespace tavlab {

using Json = nlohmann::ordered_json;

constexpr int kModelFormatVersion = 1;
constexpr int kDatasetFormatVersion = 1;
constexpr int kTrajectoryFormatVersion = 1;

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string fnv1a64_hex(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  char buf[17];
  static const char* digits = "0123456789abcdef";
  for (int i = 15; i >= 0; --i) {
    buf[i] = digits[h & 0xF];
    h >>= 4;
  }
  buf[16] = '\0';
  return std::string(buf);
}

// --- files ------------------------------------------------------------------

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_json_file(const std::filesystem::path& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

inline Json read_json_file(const std::filesystem::path& path) {
  try {
    return Json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("corrupt JSON in " + path.string() + ": " + e.what());
  }
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline void write_csv_file(const std::filesystem::path& path, const CsvTable& table) {
  std::string text;
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (i) text += ',';
    text += table.header[i];
  }
  text += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) text += ',';
      text += row[i];
    }
    text += '\n';
  }
  write_text_file(path, text);
}

// --- model checkpoints -------------------------------------------------------

inline Json arch_to_json(const MlpArchitecture& arch) {
  Json j;
  j["dims"] = arch.layer_dims;
  j["activation"] = activation_name(arch.activation);
  j["bias"] = arch.bias_enabled;
  return j;
}

inline MlpArchitecture arch_from_json(const Json& j) {
  MlpArchitecture arch;
  arch.layer_dims = j.at("dims").get<std::vector<std::size_t>>();
  arch.activation = parse_activation(j.at("activation").get<std::string>());
  arch.bias_enabled = j.at("bias").get<bool>();
  arch.validate();
  return arch;
}

inline Json model_to_json(const MlpModel& model) {
  Json j;
  j["format_version"] = kModelFormatVersion;
  j["arch"] = arch_to_json(model.arch);
  Json weights = Json::array();
  for (const DenseMatrix& w : model.weights) {
    Json rows = Json::array();
    for (std::size_t r = 0; r < w.rows; ++r) {
      Json row = Json::array();
      for (std::size_t c = 0; c < w.cols; ++c) row.push_back(w.at(r, c));
      rows.push_back(std::move(row));
    }
    weights.push_back(std::move(rows));
  }
  j["weights"] = std::move(weights);
  if (model.arch.bias_enabled) j["biases"] = model.biases;
  return j;
}

inline MlpModel model_from_json(const Json& j) {
  if (j.at("format_version").get<int>() != kModelFormatVersion)
    throw std::runtime_error("unsupported model format_version");
  MlpModel model = zero_model(arch_from_json(j.at("arch")));
  const Json& weights = j.at("weights");
  if (weights.size() != model.weights.size())
    throw std::runtime_error("model file: wrong layer count");
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    DenseMatrix& w = model.weights[l];
    const Json& rows = weights[l];
    if (rows.size() != w.rows) throw std::runtime_error("model file: wrong row count");
    for (std::size_t r = 0; r < w.rows; ++r) {
      const Json& row = rows[r];
      if (row.size() != w.cols) throw std::runtime_error("model file: wrong col count");
      for (std::size_t c = 0; c < w.cols; ++c) w.at(r, c) = row[c].get<double>();
    }
  }
  if (model.arch.bias_enabled)
    model.biases = j.at("biases").get<std::vector<std::vector<double>>>();
  return model;
}

// --- datasets ----------------------------------------------------------------

inline Json dataset_to_json(const TaskDataset& ds) {
  Json j;
  j["format_version"] = kDatasetFormatVersion;
  j["generator_version"] = kTaskGeneratorVersion;
  j["task_id"] = ds.task_id;
  j["seed"] = ds.seed;
  j["input_dim"] = ds.input_dim;
  j["num_classes"] = ds.num_classes;
  j["m_x_bound"] = ds.m_x_bound;
  j["degenerate"] = ds.degenerate;
  j["inputs"] = ds.inputs;
  j["labels"] = ds.labels;
  return j;
}

inline TaskDataset dataset_from_json(const Json& j) {
  if (j.at("format_version").get<int>() != kDatasetFormatVersion)
    throw std::runtime_error("unsupported dataset format_version");
  TaskDataset ds;
  ds.task_id = j.at("task_id").get<std::string>();
  ds.seed = j.at("seed").get<std::uint64_t>();
  ds.input_dim = j.at("input_dim").get<std::size_t>();
  ds.num_classes = j.at("num_classes").get<std::size_t>();
  ds.m_x_bound = j.at("m_x_bound").get<double>();
  ds.degenerate = j.at("degenerate").get<bool>();
  ds.inputs = j.at("inputs").get<std::vector<std::vector<double>>>();
  ds.labels = j.at("labels").get<std::vector<int>>();
  return ds;
}

// --- trajectories ------------------------------------------------------------

// <dir>/trajectory.json plus one model checkpoint file per visited point.
inline void write_trajectory(const std::filesystem::path& dir, const Trajectory& traj) {
  Json manifest;
  manifest["format_version"] = kTrajectoryFormatVersion;
  manifest["arch"] = arch_to_json(traj.arch);
  manifest["step_size"] = traj.step_size;
  manifest["epochs"] = traj.epochs();
  manifest["stop_reason"] = stop_reason_name(traj.stop_reason);
  Json records = Json::array();
  for (const EpochRecord& r : traj.records) {
    Json rec;
    rec["loss"] = r.loss;
    rec["grad_norm"] = r.grad_norm;
    records.push_back(std::move(rec));
  }
  manifest["records"] = std::move(records);
  Json files = Json::array();
  for (std::size_t i = 0; i < traj.checkpoints.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "checkpoint_%04zu.json", i);
    files.push_back(std::string(name));
    write_json_file(dir / name, model_to_json(unflatten(traj.arch, traj.checkpoints[i])));
  }
  manifest["checkpoint_files"] = std::move(files);
  write_json_file(dir / "trajectory.json", manifest);
}

inline Trajectory read_trajectory(const std::filesystem::path& dir) {
  const Json manifest = read_json_file(dir / "trajectory.json");
  Trajectory traj;
  traj.arch = arch_from_json(manifest.at("arch"));
  traj.step_size = manifest.at("step_size").get<double>();
  const std::string stop = manifest.at("stop_reason").get<std::string>();
  traj.stop_reason = stop == "tol"  ? StopReason::tol
                     : stop == "cap" ? StopReason::cap
                                     : StopReason::epochs;
  for (const Json& rec : manifest.at("records")) {
    EpochRecord r;
    r.loss = rec.at("loss").get<double>();
    r.grad_norm = rec.at("grad_norm").get<double>();
    traj.records.push_back(std::move(r));
  }
  for (const Json& name : manifest.at("checkpoint_files")) {
    const MlpModel m = model_from_json(read_json_file(dir / name.get<std::string>()));
    traj.checkpoints.push_back(flatten(m));
  }
  return traj;
}

// --- analysis reports ---------------------------------------------------------

inline Json fit_to_json(const FitResult& fit) {
  Json j;
  j["slope"] = fit.slope;
  j["intercept"] = fit.intercept;
  j["r2"] = fit.r2;
  j["points_used"] = fit.points_used;
  j["excluded"] = fit.excluded;
  return j;
}

inline Json optional_fit_to_json(const std::optional<FitResult>& fit) {
  return fit ? fit_to_json(*fit) : Json(nullptr);
}

inline Json curvature_config_to_json(const CurvatureTermConfig& cfg) {
  Json j;
  j["anchor"] = anchor_name(cfg.anchor);
  j["sign"] = cfg.sign;
  j["alpha_factor"] = alpha_factor_name(cfg.alpha_factor);
  return j;
}

inline Json gap_report_to_json(const GapReport& report) {
  Json j;
  j["epochs"] = report.epochs;
  j["task_count"] = report.task_count;
  j["alpha"] = report.alpha;
  j["noise_floor"] = kGapNoiseFloor;
  j["eta_grid"] = report.eta_grid;
  Json diverged = Json::array();
  for (std::uint8_t d : report.diverged) diverged.push_back(d != 0);
  j["diverged"] = std::move(diverged);
  Json gaps = Json::array();
  for (double g : report.gap_norms) gaps.push_back(std::isfinite(g) ? Json(g) : Json(nullptr));
  j["gap_norms"] = std::move(gaps);
  j["raw_fit"] = optional_fit_to_json(report.raw_fit);
  Json cands = Json::array();
  for (const GapCandidate& c : report.candidates) {
    Json cj;
    cj["config"] = curvature_config_to_json(c.config);
    cj["name"] = c.config.name();
    Json res = Json::array();
    for (double r : c.residual_norms)
      res.push_back(std::isfinite(r) ? Json(r) : Json(nullptr));
    cj["residual_norms"] = std::move(res);
    cj["fit"] = optional_fit_to_json(c.fit);
    cands.push_back(std::move(cj));
  }
  j["candidates"] = std::move(cands);
  j["selected_candidate"] =
      report.selected_candidate ? Json(*report.selected_candidate) : Json(nullptr);
  if (report.selected_candidate)
    j["selected_config"] = report.selected_config().name();
  return j;
}

inline CsvTable gap_report_csv(const GapReport& report) {
  CsvTable t;
  t.header = {"eta", "diverged", "gap_norm", "candidate", "residual_norm"};
  for (std::size_t i = 0; i < report.eta_grid.size(); ++i) {
    if (report.candidates.empty()) {
      t.rows.push_back({format_double(report.eta_grid[i]),
                        report.diverged[i] ? "1" : "0",
                        format_double(report.gap_norms[i]), "", ""});
      continue;
    }
    for (const GapCandidate& c : report.candidates)
      t.rows.push_back({format_double(report.eta_grid[i]),
                        report.diverged[i] ? "1" : "0",
                        format_double(report.gap_norms[i]), c.config.name(),
                        format_double(c.residual_norms[i])});
  }
  return t;
}

inline Json expansion_report_to_json(const ExpansionReport& report) {
  Json j;
  j["eta_grid"] = report.eta_grid;
  j["m_values"] = report.m_values;
  j["alpha"] = report.alpha;
  Json cands = Json::array();
  for (const ExpansionCorrection& c : report.candidates) {
    Json cj;
    cj["anchor"] = anchor_name(c.anchor);
    cj["coefficient"] = c.coefficient;
    cj["name"] = c.name();
    cands.push_back(std::move(cj));
  }
  j["candidates"] = std::move(cands);
  j["selected_candidate"] =
      report.selected_candidate ? Json(*report.selected_candidate) : Json(nullptr);
  Json cells = Json::array();
  for (const ExpansionCell& cell : report.cells) {
    Json cj;
    cj["m"] = cell.m;
    cj["task"] = cell.task;
    cj["first_norms"] = cell.first_norms;
    cj["first_fit"] = optional_fit_to_json(cell.first_fit);
    Json corr = Json::array();
    for (std::size_t c = 0; c < cell.corrected.size(); ++c) {
      Json e;
      e["candidate"] = c;
      e["norms"] = cell.corrected[c];
      e["fit"] = optional_fit_to_json(cell.corrected_fits[c]);
      corr.push_back(std::move(e));
    }
    cj["corrected"] = std::move(corr);
    cells.push_back(std::move(cj));
  }
  j["cells"] = std::move(cells);
  return j;
}

inline CsvTable expansion_report_csv(const ExpansionReport& report) {
  CsvTable t;
  t.header = {"m", "task", "eta", "first_norm", "candidate", "corrected_norm"};
  for (const ExpansionCell& cell : report.cells)
    for (std::size_t i = 0; i < report.eta_grid.size(); ++i)
      for (std::size_t c = 0; c < report.candidates.size(); ++c)
        t.rows.push_back({std::to_string(cell.m), std::to_string(cell.task),
                          format_double(report.eta_grid[i]),
                          format_double(cell.first_norms[i]),
                          report.candidates[c].name(),
                          format_double(cell.corrected[c][i])});
  return t;
}

inline Json bound_report_to_json(const BoundReport& r) {
  Json j;
  j["activation"] = r.activation;
  j["depth"] = r.depth;
  j["task_count"] = r.task_count;
  j["alpha"] = r.alpha;
  j["horizon"] = r.horizon;
  j["checkpoints_measured"] = r.checkpoints_measured;
  Json measured;
  measured["s_layers"] = r.s_layers;
  measured["pi"] = r.pi;
  measured["m_x"] = r.m_x;
  measured["grad_norm_max"] = r.g_emp;
  measured["hessian_norm_max"] = r.h_emp;
  measured["softmax_lambda_max"] = r.softmax_lambda_max;
  measured["c_norm_step_start"] = r.c_norm_step_start;
  measured["c_norm_step_end"] = r.c_norm_step_end;
  j["measured"] = std::move(measured);
  Json theory;
  theory["beta"] = r.beta;
  theory["gamma"] = r.gamma;
  theory["grad_bound"] = r.g_bound;
  theory["hessian_bound_general"] = r.h_bound_general;
  theory["hessian_bound_relu_gauss_newton"] = r.h_bound_relu_gauss_newton;
  theory["hessian_bound_relu_statement"] = r.h_bound_relu_statement;
  theory["hessian_bound_used"] = r.h_bound_used;
  theory["hessian_bound_label"] = r.h_bound_label;
  theory["binomial_factor"] = r.binomial_factor;
  theory["c_bound_abs_alphaT_minus_1"] = r.c_bound_variant_t;
  theory["c_bound_abs_alphaT1_minus_1"] = r.c_bound_variant_t1;
  j["theory"] = std::move(theory);
  Json ratios;
  ratios["grad"] = r.g_ratio;
  ratios["hessian"] = r.h_ratio;
  ratios["c_abs_alphaT_minus_1"] = r.c_ratio_t;
  ratios["c_abs_alphaT1_minus_1"] = r.c_ratio_t1;
  j["ratios"] = std::move(ratios);
  return j;
}

inline CsvTable bound_report_csv(const BoundReport& r) {
  CsvTable t;
  t.header = {"quantity", "measured", "bound", "ratio"};
  t.rows.push_back({"grad_norm", format_double(r.g_emp), format_double(r.g_bound),
                    format_double(r.g_ratio)});
  t.rows.push_back({"hessian_norm", format_double(r.h_emp), format_double(r.h_bound_used),
                    format_double(r.h_ratio)});
  const double c_meas = std::max(r.c_norm_step_start, r.c_norm_step_end);
  t.rows.push_back({"c_norm_vs_abs_alphaT_minus_1", format_double(c_meas),
                    format_double(r.c_bound_variant_t), format_double(r.c_ratio_t)});
  t.rows.push_back({"c_norm_vs_abs_alphaT1_minus_1", format_double(c_meas),
                    format_double(r.c_bound_variant_t1), format_double(r.c_ratio_t1)});
  t.rows.push_back({"softmax_lambda_max", format_double(r.softmax_lambda_max), "0.5",
                    format_double(r.softmax_lambda_max / 0.5)});
  return t;
}

inline Json dominance_report_to_json(const DominanceReport& r) {
  Json j;
  j["epochs"] = r.epochs;
  Json tasks = Json::array();
  for (std::size_t t = 0; t < r.task_ids.size(); ++t) {
    Json tj;
    tj["task_id"] = r.task_ids[t];
    tj["normalized_grad_norms"] = r.normalized_grad_norms[t];
    tj["argmax_epoch"] = r.argmax_epoch[t];
    Json cm = Json::array();
    const DenseMatrix& m = r.cosines[t].values;
    for (std::size_t i = 0; i < m.rows; ++i) {
      Json row = Json::array();
      for (std::size_t c = 0; c < m.cols; ++c) {
        const double v = m.at(i, c);
        row.push_back(std::isfinite(v) ? Json(v) : Json(nullptr));
      }
      cm.push_back(std::move(row));
    }
    tj["cosine_matrix"] = std::move(cm);
    tj["undefined_rows"] = r.cosines[t].undefined_rows;
    tasks.push_back(std::move(tj));
  }
  j["tasks"] = std::move(tasks);
  return j;
}

inline CsvTable dominance_csv(const DominanceReport& r) {
  CsvTable t;
  t.header = {"task_id", "epoch", "normalized_grad_norm"};
  for (std::size_t i = 0; i < r.task_ids.size(); ++i)
    for (std::size_t e = 0; e < r.normalized_grad_norms[i].size(); ++e)
      t.rows.push_back({r.task_ids[i], std::to_string(e + 1),
                        format_double(r.normalized_grad_norms[i][e])});
  return t;
}

inline CsvTable cosine_csv(const DominanceReport& r) {
  CsvTable t;
  t.header = {"task_id", "epoch_i", "epoch_j", "cosine"};
  for (std::size_t n = 0; n < r.task_ids.size(); ++n) {
    const DenseMatrix& m = r.cosines[n].values;
    for (std::size_t i = 0; i < m.rows; ++i)
      for (std::size_t j = 0; j < m.cols; ++j)
        t.rows.push_back({r.task_ids[n], std::to_string(i + 1), std::to_string(j + 1),
                          format_double(m.at(i, j))});
  }
  return t;
}

inline Json horizon_report_to_json(const HorizonReport& r) {
  Json j;
  j["alpha_grid"] = r.alpha_grid;
  j["base_accuracy"] = r.base_accuracy;
  auto arm_json = [](const HorizonArm& arm) {
    Json a;
    a["name"] = arm.name;
    a["epochs_per_task"] = arm.epochs_per_task;
    a["stop_reasons"] = arm.stop_reasons;
    a["best_alpha"] = arm.best_alpha;
    a["best_mean_accuracy"] = arm.best_mean_accuracy;
    Json entries = Json::array();
    for (const HorizonEntry& e : arm.entries) {
      Json ej;
      ej["alpha"] = e.alpha;
      ej["task_accuracy"] = e.task_accuracy;
      ej["mean_accuracy"] = e.mean_accuracy;
      entries.push_back(std::move(ej));
    }
    a["entries"] = std::move(entries);
    return a;
  };
  j["one_epoch"] = arm_json(r.one_epoch);
  j["converged"] = arm_json(r.converged);
  return j;
}

inline CsvTable horizon_csv(const HorizonReport& r) {
  CsvTable t;
  t.header = {"arm", "alpha", "task", "accuracy", "mean_accuracy"};
  for (const HorizonArm* arm : {&r.one_epoch, &r.converged})
    for (const HorizonEntry& e : arm->entries)
      for (std::size_t task = 0; task < e.task_accuracy.size(); ++task)
        t.rows.push_back({arm->name, format_double(e.alpha), std::to_string(task),
                          format_double(e.task_accuracy[task]),
                          format_double(e.mean_accuracy)});
  return t;
}

inline Json pca_to_json(const PcaProjection& p, const std::vector<std::string>& labels) {
  Json j;
  j["explained_variance"] = p.explained_variance;
  j["rank_deficient"] = p.rank_deficient;
  Json pts = Json::array();
  for (std::size_t i = 0; i < p.points.size(); ++i) {
    Json pj;
    pj["label"] = i < labels.size() ? labels[i] : std::to_string(i);
    pj["x"] = p.points[i][0];
    pj["y"] = p.points[i][1];
    pts.push_back(std::move(pj));
  }
  j["points"] = std::move(pts);
  return j;
}

inline CsvTable pca_csv(const PcaProjection& p, const std::vector<std::string>& labels) {
  CsvTable t;
  t.header = {"index", "label", "x", "y"};
  for (std::size_t i = 0; i < p.points.size(); ++i)
    t.rows.push_back({std::to_string(i), i < labels.size() ? labels[i] : "",
                      format_double(p.points[i][0]), format_double(p.points[i][1])});
  return t;
}

}  // namespace tavlab
