#pragma once

#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "fairmix/core_data.hpp"
#include "fairmix/error.hpp"
#include "fairmix/fit.hpp"
#include "fairmix/io.hpp"
#include "fairmix/metrics.hpp"
#include "fairmix/objective.hpp"
#include "fairmix/synthetic.hpp"

namespace fairmix {

/// Loads and validates the dataset named by a run configuration. Survival
/// curves are resampled onto `time_grid` when one is given, and fair curves
/// onto the perf grid otherwise.
inline Dataset load_dataset(const RunConfig& cfg, bool require_labels) {
  Dataset ds;
  ds.features = read_features(cfg.features);
  ds.groups = read_groups(cfg.groups, cfg.group_mode);
  if (!cfg.labels.empty()) ds.labels = read_labels(cfg.labels);
  ds.perf = read_predictions(cfg.perf, cfg.task);
  if (!cfg.fair.empty()) ds.fair = read_predictions(cfg.fair, cfg.task);
  if (cfg.task == TaskKind::survival) {
    auto& perf = std::get<SurvivalCurves>(ds.perf);
    if (!cfg.time_grid.empty()) perf = resample_curves(perf, read_time_grid(cfg.time_grid));
    if (ds.fair) {
      auto& fair = std::get<SurvivalCurves>(*ds.fair);
      if (!(fair.grid == perf.grid)) fair = resample_curves(fair, perf.grid);
    }
  }
  require_valid(ds, cfg.task, {.require_labels = require_labels});
  return ds;
}

/// Supplies fair-model predictions for the two-pretrained variants when the
/// configuration has none, by fitting the simple expert to the labels.
inline std::optional<SimpleExpertParams> ensure_fair_predictions(Dataset& ds, const RunConfig& cfg) {
  if (ds.fair) return std::nullopt;
  if (!ds.has_labels()) {
    throw ValidationError("two-pretrained variants need fair predictions ('paths.fair') or labels to fit one");
  }
  auto expert = fit_expert_to_labels(cfg.task, ds, cfg.fair_features, cfg.optimizer);
  const TimeGrid* grid = nullptr;
  if (const auto* c = std::get_if<SurvivalCurves>(&ds.perf)) grid = &c->grid;
  ds.fair = expert_predictions(cfg.task, expert, ds.features, grid);
  return expert;
}

// ---------------------------------------------------------------------------
// fit

inline ModelFile fit_model(const RunConfig& cfg, VariantKind variant, double lambda, Dataset ds) {
  ModelFile m;
  m.spec = cfg.spec(variant, lambda);
  if (uses_fair_model(variant)) m.fair_expert = ensure_fair_predictions(ds, cfg);
  const auto r = fit(m.spec, ds, cfg.optimizer, cfg.seed, cfg.expert_features);
  m.feature_columns = ds.features.column_names;
  m.params = r.params;
  m.seed = cfg.seed;
  m.optimizer = cfg.optimizer;
  m.objective_value = r.objective_value;
  m.iterations = r.iterations;
  m.converged = r.converged;
  m.status = r.status;
  return m;
}

inline void cmd_fit(const RunConfig& cfg, const std::string& out_path, std::ostream& log) {
  if (cfg.variants.size() != 1 || cfg.lambdas.size() != 1) {
    throw ValidationError("fit takes exactly one variant and one lambda (use sweep for lists)");
  }
  const auto ds = load_dataset(cfg, false);
  const auto m = fit_model(cfg, cfg.variants.front(), cfg.lambdas.front(), ds);
  write_model(out_path, m);
  log << "fit " << to_string(m.spec.variant) << " lambda=" << format_double(m.spec.lambda)
      << " objective=" << format_double(m.objective_value) << " iterations=" << m.iterations
      << (m.converged ? " converged" : " not converged (" + m.status + ")") << "\n";
}

// ---------------------------------------------------------------------------
// predict

struct PredictInputs {
  std::string model;
  std::string features;
  std::string perf;
  std::string fair;    // optional
  std::string groups;  // accepted only to be ignored
  std::string out;
};

/// Combined predictions of a saved model. Only the model's feature columns
/// are read from the features file; group files are never opened.
inline PredictionSet predict_from_files(const PredictInputs& in, std::ostream& log) {
  const auto m = read_model(in.model);
  if (!in.groups.empty()) {
    log << "notice: ignoring group assignment '" << in.groups
        << "'; predictions never use sensitive attributes\n";
  }
  const auto X = read_features(in.features, m.feature_columns);
  PredictionSet perf = read_predictions(in.perf, m.spec.task);
  if (prediction_count(perf) != X.rows) {
    throw ValidationError("perf predictions have " + std::to_string(prediction_count(perf)) +
                          " rows, features " + std::to_string(X.rows));
  }
  std::vector<std::string> problems;
  check_predictions(perf, m.spec.task, "perf predictions", problems);
  if (!problems.empty()) throw ValidationError(problems.front());

  std::optional<PredictionSet> fair;
  if (uses_fair_model(m.spec.variant)) {
    if (!in.fair.empty()) {
      fair = read_predictions(in.fair, m.spec.task);
    } else if (m.fair_expert) {
      const TimeGrid* grid = nullptr;
      if (const auto* c = std::get_if<SurvivalCurves>(&perf)) grid = &c->grid;
      fair = expert_predictions(m.spec.task, *m.fair_expert, X, grid);
    } else {
      throw ValidationError("this model needs fair-model predictions (--fair)");
    }
    if (prediction_count(*fair) != X.rows) throw ValidationError("fair predictions and features differ in row count");
    if (auto* fc = std::get_if<SurvivalCurves>(&*fair)) {
      const auto& pg = std::get<SurvivalCurves>(perf).grid;
      if (!(fc->grid == pg)) *fc = resample_curves(*fc, pg);
    }
  }
  return combined_predictions(m.spec.task, m.spec.variant, m.params, X, perf, fair);
}

inline void cmd_predict(const PredictInputs& in, std::ostream& log) {
  write_predictions(in.out, predict_from_files(in, log));
}

// ---------------------------------------------------------------------------
// sweep

struct SweepRecord {
  VariantKind variant = VariantKind::one_pretrained_moe;
  double lambda = 0.0;
  double objective = std::numeric_limits<double>::quiet_NaN();
  MetricReport metrics;
  int iterations = 0;
  bool converged = false;
  std::string error;
};

inline std::vector<std::string> metric_names(TaskKind task) {
  switch (task) {
    case TaskKind::binary_classification: return {"accuracy", "dp_gap", "eo_gap"};
    case TaskKind::regression: return {"mse", "sp_auc"};
    case TaskKind::survival: return {"c_index", "ibs", "gf_max", "gf_avg"};
  }
  return {};
}

/// Column order of the sweep TSV.
inline std::vector<std::string> sweep_columns(TaskKind task) {
  std::vector<std::string> cols{"variant", "lambda", "objective"};
  for (auto& m : metric_names(task)) cols.push_back(m);
  cols.push_back("iterations");
  cols.push_back("converged");
  return cols;
}

inline std::string format_sweep(TaskKind task, const std::vector<SweepRecord>& records) {
  const auto cols = sweep_columns(task);
  std::string s;
  for (std::size_t k = 0; k < cols.size(); ++k) s += (k ? "\t" : "") + cols[k];
  s += '\n';
  for (const auto& r : records) {
    s += to_string(r.variant) + "\t" + format_double(r.lambda) + "\t" + format_double(r.objective);
    for (const auto& m : metric_names(task)) {
      s += "\t" + format_double(r.metrics.contains(m) ? r.metrics.at(m) : std::numeric_limits<double>::quiet_NaN());
    }
    s += "\t" + std::to_string(r.iterations) + "\t" + (r.converged ? "true" : "false") + "\n";
  }
  return s;
}

/// Fits every (variant, lambda) pair on the fit split and evaluates on the
/// test split. Rows come out ordered by variant (configuration order), then
/// lambda (configuration order), whatever the thread count.
inline std::vector<SweepRecord> run_sweep(const RunConfig& cfg, std::ostream& log) {
  if (cfg.labels.empty()) throw ValidationError("sweep needs labels ('paths.labels')");
  const auto ds = load_dataset(cfg, true);
  auto [train, test] = split_train_test(ds, cfg.test_fraction, cfg.seed);
  bool needs_fair = false;
  for (auto v : cfg.variants) needs_fair = needs_fair || uses_fair_model(v);
  std::optional<SimpleExpertParams> fair_expert;
  if (needs_fair && !train.fair) {
    fair_expert = ensure_fair_predictions(train, cfg);
    const TimeGrid* grid = nullptr;
    if (const auto* c = std::get_if<SurvivalCurves>(&test.perf)) grid = &c->grid;
    test.fair = expert_predictions(cfg.task, *fair_expert, test.features, grid);
  }

  std::vector<SweepRecord> records;
  for (auto v : cfg.variants) {
    for (double l : cfg.lambdas) {
      SweepRecord r;
      r.variant = v;
      r.lambda = l;
      records.push_back(r);
    }
  }
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (std::size_t k = next++; k < records.size(); k = next++) {
      auto& r = records[k];
      try {
        const auto spec = cfg.spec(r.variant, r.lambda);
        const auto res = fit(spec, train, cfg.optimizer, cfg.seed, cfg.expert_features);
        r.objective = res.objective_value;
        r.iterations = res.iterations;
        r.converged = res.converged;
        const auto comb = combined_predictions(cfg.task, r.variant, res.params, test.features, test.perf, test.fair);
        EvaluateOptions eo;
        eo.integrator = cfg.integrator;
        r.metrics = evaluate(cfg.task, test, comb, eo);
      } catch (const std::exception& e) {
        r.converged = false;
        r.error = e.what();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(cfg.threads, static_cast<int>(records.size())));
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& r : records) {
    if (!r.error.empty()) {
      log << "warning: " << to_string(r.variant) << " lambda=" << format_double(r.lambda)
          << " failed: " << r.error << "\n";
    }
  }
  return records;
}

inline void cmd_sweep(const RunConfig& cfg, const std::string& out_path, std::ostream& log) {
  const auto records = run_sweep(cfg, log);
  write_text(out_path, format_sweep(cfg.task, records));
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateInputs {
  TaskKind task = TaskKind::binary_classification;
  std::string predictions;
  std::string labels;
  std::string groups;
  GroupMode group_mode = GroupMode::intersectional;
};

inline MetricReport evaluate_files(const EvaluateInputs& in) {
  Dataset ds;
  ds.labels = read_labels(in.labels);
  ds.groups = read_groups(in.groups, in.group_mode);
  const auto preds = read_predictions(in.predictions, in.task);
  const std::size_t n = prediction_count(preds);
  if (label_count(ds.labels) != n || ds.groups.size() != n) {
    throw ValidationError("row counts differ: predictions " + std::to_string(n) + ", labels " +
                          std::to_string(label_count(ds.labels)) + ", groups " + std::to_string(ds.groups.size()));
  }
  std::vector<std::string> problems;
  check_predictions(preds, in.task, "predictions", problems);
  if (!problems.empty()) throw ValidationError(problems.front());
  ds.features.rows = n;  // metrics need no feature columns
  return evaluate(in.task, ds, preds);
}

inline void cmd_evaluate(const EvaluateInputs& in, std::ostream& out) { out << format_metric_report(evaluate_files(in)); }

// ---------------------------------------------------------------------------
// gen-synthetic

/// Writes features.csv, labels.csv, groups.csv, perf.csv and a run
/// configuration (config.json) pointing at them into `out_dir`.
inline void cmd_gen_synthetic(const SyntheticOptions& opt, const std::string& out_dir) {
  const auto data = generate_synthetic(opt);
  const auto dir = std::filesystem::path(out_dir);
  const auto& ds = data.dataset;
  write_features((dir / "features.csv").string(), ds.features);
  write_labels((dir / "labels.csv").string(), ds.labels);
  write_group_columns((dir / "groups.csv").string(), {"group"}, {data.group_values});
  write_predictions((dir / "perf.csv").string(), ds.perf);

  json cfg;
  cfg["task"] = to_string(opt.task);
  cfg["variants"] = opt.task == TaskKind::survival
                        ? json{"one_pretrained_mixture", "one_pretrained_moe", "two_pretrained_mixture",
                               "two_pretrained_moe"}
                        : json{"one_pretrained_mixture", "one_pretrained_moe", "two_pretrained_mixture",
                               "two_pretrained_moe", "frappe"};
  cfg["lambda_list"] = json{0.01, 1, 10, 100};
  cfg["fair_features"] = json{"x1", "x2", "x3"};
  cfg["seed"] = opt.seed;
  cfg["test_fraction"] = 0.2;
  cfg["paths"] = json{{"features", "features.csv"},
                      {"labels", "labels.csv"},
                      {"groups", "groups.csv"},
                      {"perf", "perf.csv"}};
  write_text((dir / "config.json").string(), cfg.dump(2) + "\n");
}

}  // namespace fairmix
