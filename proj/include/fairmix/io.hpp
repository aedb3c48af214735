#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "fairmix/core_data.hpp"
#include "fairmix/error.hpp"
#include "fairmix/fit.hpp"
#include "fairmix/metrics.hpp"
#include "fairmix/objective.hpp"
#include "fairmix/optimizer.hpp"

namespace fairmix {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Number formatting

/// Shortest decimal that parses back to exactly `v`.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// ---------------------------------------------------------------------------
// Enum names

inline std::string to_string(TaskKind t) {
  switch (t) {
    case TaskKind::binary_classification: return "classification";
    case TaskKind::regression: return "regression";
    case TaskKind::survival: return "survival";
  }
  return "?";
}

inline std::string to_string(VariantKind v) {
  switch (v) {
    case VariantKind::one_pretrained_mixture: return "one_pretrained_mixture";
    case VariantKind::one_pretrained_moe: return "one_pretrained_moe";
    case VariantKind::two_pretrained_mixture: return "two_pretrained_mixture";
    case VariantKind::two_pretrained_moe: return "two_pretrained_moe";
    case VariantKind::frappe_baseline: return "frappe";
  }
  return "?";
}

inline std::string to_string(FidelityKind f) {
  switch (f) {
    case FidelityKind::cross_entropy: return "cross_entropy";
    case FidelityKind::cross_entropy_swapped: return "cross_entropy_swapped";
    case FidelityKind::squared_error: return "squared_error";
    case FidelityKind::integrated_survival_se: return "integrated_survival_se";
  }
  return "?";
}

inline std::string to_string(FairnessKind f) {
  switch (f) {
    case FairnessKind::statistical_parity: return "statistical_parity";
    case FairnessKind::statistical_parity_auc: return "statistical_parity_auc";
    case FairnessKind::group_fairness_survival: return "group_fairness_survival";
  }
  return "?";
}

inline std::string to_string(GroupMode m) {
  return m == GroupMode::intersectional ? "intersectional" : "per_attribute";
}

namespace detail {

template <typename E, std::size_t N>
E parse_enum(const std::string& s, const std::array<E, N>& all, const char* what) {
  std::string known;
  for (E e : all) {
    if (to_string(e) == s) return e;
    known += (known.empty() ? "" : ", ") + to_string(e);
  }
  throw ValidationError(std::string("unknown ") + what + " '" + s + "' (expected one of: " + known + ")");
}

}  // namespace detail

inline TaskKind parse_task(const std::string& s) {
  return detail::parse_enum(s, std::array{TaskKind::binary_classification, TaskKind::regression, TaskKind::survival},
                            "task");
}

inline VariantKind parse_variant(const std::string& s) {
  return detail::parse_enum(s,
                            std::array{VariantKind::one_pretrained_mixture, VariantKind::one_pretrained_moe,
                                       VariantKind::two_pretrained_mixture, VariantKind::two_pretrained_moe,
                                       VariantKind::frappe_baseline},
                            "variant");
}

inline FidelityKind parse_fidelity(const std::string& s) {
  return detail::parse_enum(s,
                            std::array{FidelityKind::cross_entropy, FidelityKind::cross_entropy_swapped,
                                       FidelityKind::squared_error, FidelityKind::integrated_survival_se},
                            "fidelity");
}

inline FairnessKind parse_fairness(const std::string& s) {
  return detail::parse_enum(s,
                            std::array{FairnessKind::statistical_parity, FairnessKind::statistical_parity_auc,
                                       FairnessKind::group_fairness_survival},
                            "fairness");
}

inline GroupMode parse_group_mode(const std::string& s) {
  return detail::parse_enum(s, std::array{GroupMode::intersectional, GroupMode::per_attribute}, "group mode");
}

// ---------------------------------------------------------------------------
// CSV

struct CsvTable {
  std::string path;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(const std::string& name) const {
    for (std::size_t k = 0; k < header.size(); ++k) {
      if (header[k] == name) return k;
    }
    return std::nullopt;
  }

  // Line number in the file of data row r (header is line 1).
  std::size_t line_of(std::size_t r) const { return r + 2; }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line, const std::string& path, std::size_t lineno) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  if (quoted) throw ValidationError(path + ":" + std::to_string(lineno) + ": unterminated quoted field");
  out.push_back(std::move(cur));
  return out;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

}  // namespace detail

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  CsvTable t;
  t.path = path;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (line.empty() || line == "\r") continue;
    auto fields = detail::split_csv_line(line, path, lineno);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                            " fields, found " + std::to_string(fields.size()));
    }
    t.rows.push_back(std::move(fields));
  }
  if (in.bad()) throw IoError("error while reading '" + path + "'");
  if (t.header.empty()) throw ValidationError(path + ": missing header row");
  return t;
}

inline void write_text(const std::string& path, const std::string& content) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(parent, ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << content;
  out.flush();
  if (!out) throw IoError("error while writing '" + path + "'");
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace detail {

inline double cell_number(const CsvTable& t, std::size_t r, std::size_t c) {
  const auto v = parse_double(t.rows[r][c]);
  if (!v) {
    throw ValidationError(t.path + ":" + std::to_string(t.line_of(r)) + ": column '" + t.header[c] +
                          "' is not a number: '" + t.rows[r][c] + "'");
  }
  return *v;
}

inline std::size_t require_column(const CsvTable& t, const std::string& name) {
  const auto c = t.column(name);
  if (!c) throw ValidationError(t.path + ": missing column '" + name + "'");
  return *c;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Features, labels, groups, predictions

/// All columns numeric. With `columns` given, only those are read, in that
/// order; other columns are ignored.
inline FeatureMatrix read_features(const std::string& path, const std::vector<std::string>& columns = {}) {
  const auto t = read_csv(path);
  std::vector<std::size_t> idx;
  FeatureMatrix X;
  if (columns.empty()) {
    for (std::size_t k = 0; k < t.header.size(); ++k) idx.push_back(k);
    X.column_names = t.header;
  } else {
    for (const auto& name : columns) idx.push_back(detail::require_column(t, name));
    X.column_names = columns;
  }
  X.rows = t.rows.size();
  X.values.reserve(X.rows * idx.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (std::size_t c : idx) {
      const double v = detail::cell_number(t, r, c);
      if (!std::isfinite(v)) {
        throw ValidationError(t.path + ":" + std::to_string(t.line_of(r)) + ": non-finite feature value");
      }
      X.values.push_back(v);
    }
  }
  return X;
}

inline void write_features(const std::string& path, const FeatureMatrix& X) {
  std::string s;
  for (std::size_t k = 0; k < X.cols(); ++k) s += (k ? "," : "") + detail::csv_field(X.column_names[k]);
  s += '\n';
  for (std::size_t i = 0; i < X.rows; ++i) {
    for (std::size_t k = 0; k < X.cols(); ++k) s += (k ? "," : "") + format_double(X(i, k));
    s += '\n';
  }
  write_text(path, s);
}

/// Labels file: a `label` column (0/1), a `target` column, or `time,event`.
inline Labels read_labels(const std::string& path) {
  const auto t = read_csv(path);
  if (const auto c = t.column("label")) {
    std::vector<int> y;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const double v = detail::cell_number(t, r, *c);
      if (v != 0.0 && v != 1.0) {
        throw ValidationError(t.path + ":" + std::to_string(t.line_of(r)) + ": label must be 0 or 1");
      }
      y.push_back(static_cast<int>(v));
    }
    return y;
  }
  if (const auto c = t.column("target")) {
    std::vector<double> y;
    for (std::size_t r = 0; r < t.rows.size(); ++r) y.push_back(detail::cell_number(t, r, *c));
    return y;
  }
  if (t.column("time") && t.column("event")) {
    const auto ct = *t.column("time");
    const auto ce = *t.column("event");
    std::vector<SurvivalOutcome> y;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const double e = detail::cell_number(t, r, ce);
      if (e != 0.0 && e != 1.0) {
        throw ValidationError(t.path + ":" + std::to_string(t.line_of(r)) + ": event must be 0 or 1");
      }
      y.push_back({detail::cell_number(t, r, ct), e == 1.0});
    }
    return y;
  }
  throw ValidationError(path + ": expected a 'label', 'target', or 'time,event' header");
}

inline void write_labels(const std::string& path, const Labels& labels) {
  std::string s;
  if (const auto* y = std::get_if<std::vector<int>>(&labels)) {
    s = "label\n";
    for (int v : *y) s += std::to_string(v) + "\n";
  } else if (const auto* y = std::get_if<std::vector<double>>(&labels)) {
    s = "target\n";
    for (double v : *y) s += format_double(v) + "\n";
  } else if (const auto* y = std::get_if<std::vector<SurvivalOutcome>>(&labels)) {
    s = "time,event\n";
    for (const auto& o : *y) s += format_double(o.time) + "," + (o.event ? "1" : "0") + "\n";
  } else {
    throw ValidationError("no labels to write");
  }
  write_text(path, s);
}

/// Every column is a sensitive attribute; values are treated as strings.
inline GroupAssignment read_groups(const std::string& path, GroupMode mode = GroupMode::intersectional) {
  const auto t = read_csv(path);
  std::vector<std::vector<std::string>> cols(t.header.size());
  for (const auto& row : t.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) cols[k].push_back(row[k]);
  }
  return make_groups(cols, mode);
}

inline void write_group_columns(const std::string& path, const std::vector<std::string>& names,
                                const std::vector<std::vector<std::string>>& columns) {
  std::string s;
  for (std::size_t k = 0; k < names.size(); ++k) s += (k ? "," : "") + detail::csv_field(names[k]);
  s += '\n';
  const std::size_t n = columns.empty() ? 0 : columns.front().size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < columns.size(); ++k) s += (k ? "," : "") + detail::csv_field(columns[k][i]);
    s += '\n';
  }
  write_text(path, s);
}

inline ScorePredictions read_scores(const std::string& path, ScoreKind kind) {
  const auto t = read_csv(path);
  const auto c = detail::require_column(t, "pred");
  ScorePredictions p{{}, kind};
  for (std::size_t r = 0; r < t.rows.size(); ++r) p.values.push_back(detail::cell_number(t, r, c));
  return p;
}

inline std::string format_scores(const ScorePredictions& p) {
  std::string s = "pred\n";
  for (double v : p.values) s += format_double(v) + "\n";
  return s;
}

/// Curve file: header `id,t=<v1>,...,t=<vm>`, one row per instance.
inline SurvivalCurves read_curves(const std::string& path) {
  const auto t = read_csv(path);
  if (t.header.size() < 2 || t.header[0] != "id") {
    throw ValidationError(path + ": curve file header must start with 'id' followed by 't=<value>' columns");
  }
  SurvivalCurves c;
  for (std::size_t k = 1; k < t.header.size(); ++k) {
    const auto& h = t.header[k];
    const auto v = h.rfind("t=", 0) == 0 ? parse_double(std::string_view(h).substr(2)) : std::nullopt;
    if (!v) throw ValidationError(path + ": bad curve column name '" + h + "'");
    c.grid.times.push_back(*v);
  }
  std::vector<std::string> problems;
  check_time_grid(c.grid, path, problems);
  if (!problems.empty()) throw ValidationError(problems.front());
  c.rows = t.rows.size();
  c.probs.reserve(c.rows * c.grid.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (std::size_t k = 1; k < t.header.size(); ++k) c.probs.push_back(detail::cell_number(t, r, k));
  }
  return c;
}

inline std::string format_curves(const SurvivalCurves& c) {
  std::string s = "id";
  for (double t : c.grid.times) s += ",t=" + format_double(t);
  s += '\n';
  for (std::size_t i = 0; i < c.rows; ++i) {
    s += std::to_string(i);
    for (double v : c.row(i)) s += "," + format_double(v);
    s += '\n';
  }
  return s;
}

/// Score file for classification/regression, curve file for survival.
inline PredictionSet read_predictions(const std::string& path, TaskKind task) {
  if (task == TaskKind::survival) return read_curves(path);
  return read_scores(path, task == TaskKind::binary_classification ? ScoreKind::probability : ScoreKind::regression);
}

inline std::string format_predictions(const PredictionSet& p) {
  if (const auto* s = std::get_if<ScorePredictions>(&p)) return format_scores(*s);
  return format_curves(std::get<SurvivalCurves>(p));
}

inline void write_predictions(const std::string& path, const PredictionSet& p) {
  write_text(path, format_predictions(p));
}

/// Single column `t`.
inline TimeGrid read_time_grid(const std::string& path) {
  const auto t = read_csv(path);
  const auto c = detail::require_column(t, "t");
  TimeGrid g;
  for (std::size_t r = 0; r < t.rows.size(); ++r) g.times.push_back(detail::cell_number(t, r, c));
  std::vector<std::string> problems;
  check_time_grid(g, path, problems);
  if (!problems.empty()) throw ValidationError(problems.front());
  return g;
}

// ---------------------------------------------------------------------------
// JSON helpers

namespace detail {

template <typename T>
T json_get(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key)) throw ValidationError(ctx + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(ctx + ": field '" + key + "' has the wrong type");
  }
}

inline json parse_json(const std::string& text, const std::string& path) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(path + ": invalid JSON (" + e.what() + ")");
  }
}

}  // namespace detail

inline json to_json(const OptimizerOptions& o) {
  return json{{"memory", o.memory},       {"max_iters", o.max_iters}, {"grad_tol", o.grad_tol},
              {"fd_step", o.fd_step},     {"restarts", o.restarts},   {"f_rel_tol", o.f_rel_tol}};
}

inline OptimizerOptions optimizer_from_json(const json& j, const std::string& ctx) {
  OptimizerOptions o;
  if (!j.is_object()) throw ValidationError(ctx + ": optimizer must be an object");
  if (j.contains("memory")) o.memory = detail::json_get<int>(j, "memory", ctx);
  if (j.contains("max_iters")) o.max_iters = detail::json_get<int>(j, "max_iters", ctx);
  if (j.contains("grad_tol")) o.grad_tol = detail::json_get<double>(j, "grad_tol", ctx);
  if (j.contains("fd_step")) o.fd_step = detail::json_get<double>(j, "fd_step", ctx);
  if (j.contains("restarts")) o.restarts = detail::json_get<int>(j, "restarts", ctx);
  if (j.contains("f_rel_tol")) o.f_rel_tol = detail::json_get<double>(j, "f_rel_tol", ctx);
  if (!o.valid()) throw ValidationError(ctx + ": invalid optimizer options");
  return o;
}

inline json to_json(const IntegratorConfig& c) {
  return json{{"initial_points", c.initial_points}, {"max_points", c.max_points}, {"rel_tol", c.rel_tol},
              {"confirm_levels", c.confirm_levels}};
}

inline IntegratorConfig integrator_from_json(const json& j, const std::string& ctx) {
  IntegratorConfig c;
  if (j.contains("initial_points")) c.initial_points = detail::json_get<std::size_t>(j, "initial_points", ctx);
  if (j.contains("max_points")) c.max_points = detail::json_get<std::size_t>(j, "max_points", ctx);
  if (j.contains("rel_tol")) c.rel_tol = detail::json_get<double>(j, "rel_tol", ctx);
  if (j.contains("confirm_levels")) c.confirm_levels = detail::json_get<int>(j, "confirm_levels", ctx);
  if (!c.valid()) throw ValidationError(ctx + ": invalid integrator configuration");
  return c;
}

inline json to_json(const ObjectiveSpec& s) {
  return json{{"task", to_string(s.task)},         {"variant", to_string(s.variant)},
              {"lambda", s.lambda},                {"fidelity", to_string(s.fidelity)},
              {"fairness", to_string(s.fairness)}, {"integrator", to_json(s.integrator)},
              {"sp_auc_smoothing", s.sp_auc_smoothing}};
}

inline ObjectiveSpec spec_from_json(const json& j, const std::string& ctx) {
  ObjectiveSpec s;
  s.task = parse_task(detail::json_get<std::string>(j, "task", ctx));
  s.variant = parse_variant(detail::json_get<std::string>(j, "variant", ctx));
  s.lambda = detail::json_get<double>(j, "lambda", ctx);
  s.fidelity = parse_fidelity(detail::json_get<std::string>(j, "fidelity", ctx));
  s.fairness = parse_fairness(detail::json_get<std::string>(j, "fairness", ctx));
  if (j.contains("integrator")) s.integrator = integrator_from_json(j.at("integrator"), ctx);
  if (j.contains("sp_auc_smoothing")) s.sp_auc_smoothing = detail::json_get<double>(j, "sp_auc_smoothing", ctx);
  check_spec(s);
  return s;
}

inline json to_json(const SimpleExpertParams& e) {
  return json{{"features", e.feature_subset}, {"gamma", e.gamma}};
}

inline SimpleExpertParams expert_from_json(const json& j, const std::string& ctx) {
  SimpleExpertParams e{detail::json_get<std::vector<double>>(j, "gamma", ctx),
                       detail::json_get<std::vector<std::string>>(j, "features", ctx)};
  if (!e.valid()) throw ValidationError(ctx + ": expert needs one coefficient per feature plus an intercept");
  return e;
}

inline json to_json(const CombinerParams& p) {
  json gate;
  if (p.gate.variant == GateVariant::constant) {
    gate = json{{"kind", "constant"}, {"alpha", p.gate.alpha}};
  } else {
    gate = json{{"kind", "logistic"}, {"beta", p.gate.beta}, {"beta0", p.gate.beta0}};
  }
  json j{{"gate", gate}};
  if (p.expert) j["expert"] = to_json(*p.expert);
  if (p.theta) j["theta"] = *p.theta;
  return j;
}

inline CombinerParams params_from_json(const json& j, const std::string& ctx) {
  CombinerParams p;
  if (!j.contains("gate")) throw ValidationError(ctx + ": missing field 'gate'");
  const auto& g = j.at("gate");
  const auto kind = detail::json_get<std::string>(g, "kind", ctx);
  if (kind == "constant") {
    p.gate = GateParams::constant(detail::json_get<double>(g, "alpha", ctx));
  } else if (kind == "logistic") {
    p.gate = GateParams::logistic(detail::json_get<std::vector<double>>(g, "beta", ctx),
                                  detail::json_get<double>(g, "beta0", ctx));
  } else {
    throw ValidationError(ctx + ": unknown gate kind '" + kind + "'");
  }
  if (j.contains("expert")) p.expert = expert_from_json(j.at("expert"), ctx);
  if (j.contains("theta")) p.theta = detail::json_get<std::vector<double>>(j, "theta", ctx);
  return p;
}

// ---------------------------------------------------------------------------
// Model file

struct ModelFile {
  ObjectiveSpec spec;
  std::vector<std::string> feature_columns;
  CombinerParams params;
  std::uint64_t seed = 0;
  OptimizerOptions optimizer;
  // Fair model fitted to the labels when no fair predictions were supplied.
  std::optional<SimpleExpertParams> fair_expert;
  double objective_value = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string status;
};

inline std::string format_model(const ModelFile& m) {
  json j;
  j["format"] = "fairmix-model/1";
  j["task"] = to_string(m.spec.task);
  j["variant"] = to_string(m.spec.variant);
  j["feature_columns"] = m.feature_columns;
  j["params"] = to_json(m.params);
  if (m.fair_expert) j["fair_expert"] = to_json(*m.fair_expert);
  j["spec"] = to_json(m.spec);
  j["seed"] = m.seed;
  j["optimizer"] = to_json(m.optimizer);
  j["diagnostics"] = json{{"objective_value", m.objective_value},
                          {"iterations", m.iterations},
                          {"converged", m.converged},
                          {"status", m.status}};
  return j.dump(2) + "\n";
}

inline ModelFile parse_model(const std::string& text, const std::string& path) {
  const json j = detail::parse_json(text, path);
  ModelFile m;
  if (!j.contains("spec")) throw ValidationError(path + ": missing field 'spec'");
  m.spec = spec_from_json(j.at("spec"), path);
  m.feature_columns = detail::json_get<std::vector<std::string>>(j, "feature_columns", path);
  if (!j.contains("params")) throw ValidationError(path + ": missing field 'params'");
  m.params = params_from_json(j.at("params"), path);
  check_params(m.params, m.spec.variant, m.feature_columns.size());
  if (j.contains("fair_expert")) m.fair_expert = expert_from_json(j.at("fair_expert"), path);
  if (j.contains("seed")) m.seed = detail::json_get<std::uint64_t>(j, "seed", path);
  if (j.contains("optimizer")) m.optimizer = optimizer_from_json(j.at("optimizer"), path);
  if (j.contains("diagnostics")) {
    const auto& d = j.at("diagnostics");
    m.objective_value = detail::json_get<double>(d, "objective_value", path);
    m.iterations = detail::json_get<int>(d, "iterations", path);
    m.converged = detail::json_get<bool>(d, "converged", path);
    m.status = detail::json_get<std::string>(d, "status", path);
  }
  return m;
}

inline void write_model(const std::string& path, const ModelFile& m) { write_text(path, format_model(m)); }

inline ModelFile read_model(const std::string& path) { return parse_model(read_text(path), path); }

// ---------------------------------------------------------------------------
// Run configuration

struct RunConfig {
  TaskKind task = TaskKind::binary_classification;
  std::vector<VariantKind> variants{VariantKind::one_pretrained_moe};
  std::vector<double> lambdas{1.0};
  std::optional<FidelityKind> fidelity;
  std::optional<FairnessKind> fairness;
  std::vector<std::string> expert_features;
  std::vector<std::string> fair_features;
  OptimizerOptions optimizer;
  IntegratorConfig integrator;
  double sp_auc_smoothing = 0.05;
  GroupMode group_mode = GroupMode::intersectional;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string features;
  std::string labels;
  std::string groups;
  std::string perf;
  std::string fair;
  std::string time_grid;

  ObjectiveSpec spec(VariantKind v, double lambda) const {
    ObjectiveSpec s = default_spec(task, v, lambda);
    if (fidelity) s.fidelity = *fidelity;
    if (fairness) s.fairness = *fairness;
    s.integrator = integrator;
    s.sp_auc_smoothing = sp_auc_smoothing;
    check_spec(s);
    return s;
  }
};

/// Parses a run configuration; relative paths resolve against `base_dir`.
inline RunConfig parse_run_config(const std::string& text, const std::string& path, const std::string& base_dir) {
  const json j = detail::parse_json(text, path);
  if (!j.is_object()) throw ValidationError(path + ": configuration must be a JSON object");
  RunConfig c;
  c.task = parse_task(detail::json_get<std::string>(j, "task", path));
  if (j.contains("variant") && j.contains("variants")) {
    throw ValidationError(path + ": give either 'variant' or 'variants', not both");
  }
  if (j.contains("variant")) c.variants = {parse_variant(detail::json_get<std::string>(j, "variant", path))};
  if (j.contains("variants")) {
    c.variants.clear();
    for (const auto& s : detail::json_get<std::vector<std::string>>(j, "variants", path)) {
      c.variants.push_back(parse_variant(s));
    }
    if (c.variants.empty()) throw ValidationError(path + ": 'variants' is empty");
  }
  if (j.contains("lambda") && j.contains("lambda_list")) {
    throw ValidationError(path + ": give either 'lambda' or 'lambda_list', not both");
  }
  if (j.contains("lambda")) c.lambdas = {detail::json_get<double>(j, "lambda", path)};
  if (j.contains("lambda_list")) {
    c.lambdas = detail::json_get<std::vector<double>>(j, "lambda_list", path);
    if (c.lambdas.empty()) throw ValidationError(path + ": 'lambda_list' is empty");
  }
  for (double l : c.lambdas) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw ValidationError(path + ": lambda values must be finite and >= 0");
  }
  if (j.contains("fidelity")) c.fidelity = parse_fidelity(detail::json_get<std::string>(j, "fidelity", path));
  if (j.contains("fairness")) c.fairness = parse_fairness(detail::json_get<std::string>(j, "fairness", path));
  if (j.contains("expert_features")) {
    c.expert_features = detail::json_get<std::vector<std::string>>(j, "expert_features", path);
  }
  if (j.contains("fair_features")) {
    c.fair_features = detail::json_get<std::vector<std::string>>(j, "fair_features", path);
  }
  if (j.contains("optimizer")) c.optimizer = optimizer_from_json(j.at("optimizer"), path);
  if (j.contains("integrator")) c.integrator = integrator_from_json(j.at("integrator"), path);
  if (j.contains("sp_auc_smoothing")) c.sp_auc_smoothing = detail::json_get<double>(j, "sp_auc_smoothing", path);
  if (j.contains("group_mode")) c.group_mode = parse_group_mode(detail::json_get<std::string>(j, "group_mode", path));
  if (j.contains("test_fraction")) c.test_fraction = detail::json_get<double>(j, "test_fraction", path);
  if (j.contains("seed")) c.seed = detail::json_get<std::uint64_t>(j, "seed", path);
  if (j.contains("threads")) c.threads = detail::json_get<int>(j, "threads", path);
  if (c.threads < 1) throw ValidationError(path + ": 'threads' must be >= 1");

  if (!j.contains("paths")) throw ValidationError(path + ": missing field 'paths'");
  const auto& p = j.at("paths");
  auto resolve = [&](const char* key, bool required) -> std::string {
    if (!p.contains(key)) {
      if (required) throw ValidationError(path + ": missing path '" + key + "'");
      return {};
    }
    std::filesystem::path f = detail::json_get<std::string>(p, key, path);
    if (f.is_relative() && !base_dir.empty()) f = std::filesystem::path(base_dir) / f;
    return f.lexically_normal().string();
  };
  c.features = resolve("features", true);
  c.labels = resolve("labels", false);
  c.groups = resolve("groups", true);
  c.perf = resolve("perf", true);
  c.fair = resolve("fair", false);
  c.time_grid = resolve("time_grid", false);
  for (auto v : c.variants) c.spec(v, c.lambdas.front());
  return c;
}

inline RunConfig read_run_config(const std::string& path) {
  const auto base = std::filesystem::path(path).parent_path().string();
  return parse_run_config(read_text(path), path, base);
}

inline std::string format_metric_report(const MetricReport& rep) {
  json j = json::object();
  for (const auto& [k, v] : rep.values) j[k] = v;
  return j.dump(2) + "\n";
}

}  // namespace fairmix
