#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "fairmix/error.hpp"
#include "fairmix/rng.hpp"

namespace fairmix {

enum class TaskKind { binary_classification, regression, survival };

enum class ScoreKind { probability, regression };

enum class GroupMode { intersectional, per_attribute };

/// Row-major n x d matrix of standardized features.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::vector<std::string> column_names;
  std::vector<double> values;

  std::size_t cols() const { return column_names.size(); }

  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * cols(), cols()};
  }

  double operator()(std::size_t i, std::size_t j) const { return values[i * cols() + j]; }

  std::optional<std::size_t> column_index(const std::string& name) const {
    auto it = std::find(column_names.begin(), column_names.end(), name);
    if (it == column_names.end()) return std::nullopt;
    return static_cast<std::size_t>(it - column_names.begin());
  }
};

/// Sensitive-group partition of the instances.
///
/// `ids` always holds the intersectional partition. When `mode` is
/// per_attribute, `attributes` carries one partition per sensitive attribute
/// and fairness penalties take the maximum over them.
struct GroupAssignment {
  std::vector<int> ids;
  std::vector<std::string> labels;
  GroupMode mode = GroupMode::intersectional;
  std::vector<GroupAssignment> attributes;

  std::size_t size() const { return ids.size(); }
  int count() const { return static_cast<int>(labels.size()); }

  // Partitions a fairness penalty has to be evaluated on.
  std::vector<const GroupAssignment*> partitions() const {
    if (mode == GroupMode::per_attribute && !attributes.empty()) {
      std::vector<const GroupAssignment*> out;
      for (const auto& a : attributes) out.push_back(&a);
      return out;
    }
    return {this};
  }

  std::vector<std::size_t> group_sizes() const {
    std::vector<std::size_t> sizes(labels.size(), 0);
    for (int id : ids) {
      if (id >= 0 && id < count()) ++sizes[static_cast<std::size_t>(id)];
    }
    return sizes;
  }
};

/// Builds a single-attribute partition; ids follow the sorted order of the
/// distinct values.
inline GroupAssignment make_partition(std::span<const std::string> values) {
  std::map<std::string, int> index;
  for (const auto& v : values) index.emplace(v, 0);
  GroupAssignment g;
  for (auto& [label, id] : index) {
    id = static_cast<int>(g.labels.size());
    g.labels.push_back(label);
  }
  g.ids.reserve(values.size());
  for (const auto& v : values) g.ids.push_back(index.at(v));
  return g;
}

/// Builds the intersectional partition (cross product of observed attribute
/// values, labels joined by '&') and keeps the per-attribute partitions.
inline GroupAssignment make_groups(const std::vector<std::vector<std::string>>& columns,
                                   GroupMode mode = GroupMode::intersectional) {
  if (columns.empty()) throw ValidationError("group assignment needs at least one attribute");
  const std::size_t n = columns.front().size();
  for (const auto& c : columns) {
    if (c.size() != n) throw ValidationError("group attribute columns differ in length");
  }
  std::vector<std::string> joined(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < columns.size(); ++a) {
      if (a > 0) joined[i] += '&';
      joined[i] += columns[a][i];
    }
  }
  GroupAssignment g = make_partition(joined);
  g.mode = mode;
  if (columns.size() > 1) {
    for (const auto& c : columns) g.attributes.push_back(make_partition(c));
  }
  return g;
}

struct ScorePredictions {
  std::vector<double> values;
  ScoreKind kind = ScoreKind::probability;

  std::size_t size() const { return values.size(); }
};

struct TimeGrid {
  std::vector<double> times;

  std::size_t size() const { return times.size(); }
  double tau() const { return times.empty() ? 0.0 : times.back(); }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;
};

/// Evenly spaced grid on [0, tau] with `points` entries.
inline TimeGrid even_grid(double tau, std::size_t points) {
  if (points < 2 || !(tau > 0.0)) throw ValidationError("even_grid needs tau > 0 and >= 2 points");
  TimeGrid g;
  g.times.resize(points);
  for (std::size_t j = 0; j < points; ++j) {
    g.times[j] = tau * static_cast<double>(j) / static_cast<double>(points - 1);
  }
  g.times.back() = tau;
  return g;
}

/// Row-major n x m survival probabilities on a shared grid.
struct SurvivalCurves {
  TimeGrid grid;
  std::size_t rows = 0;
  std::vector<double> probs;

  std::size_t cols() const { return grid.size(); }

  std::span<const double> row(std::size_t i) const {
    return {probs.data() + i * cols(), cols()};
  }
  std::span<double> row(std::size_t i) { return {probs.data() + i * cols(), cols()}; }

  double operator()(std::size_t i, std::size_t j) const { return probs[i * cols() + j]; }
};

struct SurvivalOutcome {
  double time = 0.0;
  bool event = false;

  bool operator==(const SurvivalOutcome&) const = default;
};

using Labels = std::variant<std::monostate, std::vector<int>, std::vector<double>,
                            std::vector<SurvivalOutcome>>;

using PredictionSet = std::variant<ScorePredictions, SurvivalCurves>;

inline std::size_t prediction_count(const PredictionSet& p) {
  return std::visit(
      [](const auto& v) -> std::size_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(v)>, ScorePredictions>) {
          return v.size();
        } else {
          return v.rows;
        }
      },
      p);
}

inline std::size_t label_count(const Labels& l) {
  return std::visit(
      [](const auto& v) -> std::size_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(v)>, std::monostate>) {
          return 0;
        } else {
          return v.size();
        }
      },
      l);
}

struct Dataset {
  FeatureMatrix features;
  GroupAssignment groups;
  Labels labels;
  PredictionSet perf = ScorePredictions{};
  std::optional<PredictionSet> fair;

  std::size_t size() const { return features.rows; }
  bool has_labels() const { return !std::holds_alternative<std::monostate>(labels); }
};

struct ValidationReport {
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
};

struct ValidationOptions {
  bool require_labels = false;
  // Fitting data must contain every group; a held-out split may not.
  bool require_all_groups = true;
};

namespace detail {

inline std::string fmt_index(const std::string& what, std::size_t i) {
  return what + "[" + std::to_string(i) + "]";
}

}  // namespace detail

inline void check_time_grid(const TimeGrid& grid, const std::string& ctx,
                            std::vector<std::string>& out) {
  const auto& t = grid.times;
  if (t.size() < 2) {
    out.push_back(ctx + ": time grid needs at least 2 points");
    return;
  }
  if (t[0] != 0.0) out.push_back(ctx + ": time grid must start at 0");
  for (std::size_t j = 0; j < t.size(); ++j) {
    if (!std::isfinite(t[j])) {
      out.push_back(ctx + ": non-finite time at index " + std::to_string(j));
    } else if (j > 0 && !(t[j] > t[j - 1])) {
      out.push_back(ctx + ": time grid not strictly increasing at index " + std::to_string(j));
    }
  }
}

inline void check_curves(const SurvivalCurves& c, const std::string& ctx,
                         std::vector<std::string>& out) {
  check_time_grid(c.grid, ctx, out);
  const std::size_t m = c.grid.size();
  if (c.probs.size() != c.rows * m) {
    out.push_back(ctx + ": curve matrix has " + std::to_string(c.probs.size()) +
                  " entries, expected " + std::to_string(c.rows * m));
    return;
  }
  for (std::size_t i = 0; i < c.rows; ++i) {
    const auto r = c.row(i);
    for (std::size_t j = 0; j < m; ++j) {
      const std::string where = detail::fmt_index(ctx, i);
      if (!std::isfinite(r[j]) || r[j] < 0.0 || r[j] > 1.0) {
        out.push_back(where + ": survival probability out of [0,1] at index " + std::to_string(j));
      } else if (j > 0 && r[j] > r[j - 1]) {
        out.push_back(where + ": non-increasing violated at index " + std::to_string(j));
      }
    }
    if (m > 0 && r[0] != 1.0) out.push_back(detail::fmt_index(ctx, i) + ": S(0) must equal 1");
  }
}

inline void check_scores(const ScorePredictions& p, TaskKind task, const std::string& ctx,
                         std::vector<std::string>& out) {
  const bool want_prob = task == TaskKind::binary_classification;
  if (want_prob != (p.kind == ScoreKind::probability)) {
    out.push_back(ctx + ": prediction kind does not match task");
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double v = p.values[i];
    if (!std::isfinite(v)) {
      out.push_back(detail::fmt_index(ctx, i) + ": non-finite prediction");
    } else if (p.kind == ScoreKind::probability && (v < 0.0 || v > 1.0)) {
      out.push_back(detail::fmt_index(ctx, i) + ": probability out of [0,1]");
    }
  }
}

inline void check_predictions(const PredictionSet& p, TaskKind task, const std::string& ctx,
                              std::vector<std::string>& out) {
  if (const auto* s = std::get_if<ScorePredictions>(&p)) {
    if (task == TaskKind::survival) out.push_back(ctx + ": survival task needs curve predictions");
    check_scores(*s, task, ctx, out);
  } else {
    if (task != TaskKind::survival) out.push_back(ctx + ": curve predictions need survival task");
    check_curves(std::get<SurvivalCurves>(p), ctx, out);
  }
}

/// Collects every invariant violation of `ds`; an empty report means valid.
inline ValidationReport validate_dataset(const Dataset& ds, TaskKind task,
                                         ValidationOptions opts = {}) {
  ValidationReport rep;
  auto& out = rep.violations;
  const std::size_t n = ds.features.rows;

  // features
  const auto& X = ds.features;
  if (n < 1) out.push_back("features: need at least one row");
  if (X.cols() < 1) out.push_back("features: need at least one column");
  if (X.values.size() != n * X.cols()) {
    out.push_back("features: every row must have exactly " + std::to_string(X.cols()) + " entries");
  } else {
    for (std::size_t k = 0; k < X.values.size(); ++k) {
      if (!std::isfinite(X.values[k])) {
        out.push_back("features: non-finite entry at row " + std::to_string(k / X.cols()) +
                      ", column " + X.column_names[k % X.cols()]);
      }
    }
  }

  // groups
  std::vector<const GroupAssignment*> parts{&ds.groups};
  for (const auto& a : ds.groups.attributes) parts.push_back(&a);
  for (const GroupAssignment* part : parts) {
    const auto& g = *part;
    if (g.count() < 1) out.push_back("groups: need at least one group");
    if (g.size() != n) out.push_back("groups: length differs from features");
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (g.ids[i] < 0 || g.ids[i] >= g.count()) {
        out.push_back(detail::fmt_index("groups", i) + ": group id out of range");
      }
    }
    if (opts.require_all_groups) {
      const auto sizes = g.group_sizes();
      for (std::size_t k = 0; k < sizes.size(); ++k) {
        if (sizes[k] == 0) out.push_back("groups: group '" + g.labels[k] + "' is empty");
      }
    }
  }

  // labels
  if (!ds.has_labels()) {
    if (opts.require_labels) out.push_back("labels: required but absent");
  } else {
    if (label_count(ds.labels) != n) out.push_back("labels: length differs from features");
    if (const auto* b = std::get_if<std::vector<int>>(&ds.labels)) {
      if (task != TaskKind::binary_classification) out.push_back("labels: binary labels need classification task");
      for (std::size_t i = 0; i < b->size(); ++i) {
        if ((*b)[i] != 0 && (*b)[i] != 1) out.push_back(detail::fmt_index("labels", i) + ": label must be 0 or 1");
      }
    } else if (const auto* r = std::get_if<std::vector<double>>(&ds.labels)) {
      if (task != TaskKind::regression) out.push_back("labels: real targets need regression task");
      for (std::size_t i = 0; i < r->size(); ++i) {
        if (!std::isfinite((*r)[i])) out.push_back(detail::fmt_index("labels", i) + ": non-finite target");
      }
    } else {
      const auto& s = std::get<std::vector<SurvivalOutcome>>(ds.labels);
      if (task != TaskKind::survival) out.push_back("labels: survival outcomes need survival task");
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (!std::isfinite(s[i].time) || !(s[i].time > 0.0)) {
          out.push_back(detail::fmt_index("labels", i) + ": survival time must be positive and finite");
        }
      }
    }
  }

  // predictions
  if (prediction_count(ds.perf) != n) out.push_back("perf_preds: length differs from features");
  check_predictions(ds.perf, task, "perf_preds", out);
  if (ds.fair) {
    if (prediction_count(*ds.fair) != n) out.push_back("fair_preds: length differs from features");
    check_predictions(*ds.fair, task, "fair_preds", out);
    if (task == TaskKind::survival && ds.fair->index() == 1 && ds.perf.index() == 1 &&
        !(std::get<SurvivalCurves>(*ds.fair).grid == std::get<SurvivalCurves>(ds.perf).grid)) {
      out.push_back("fair_preds: time grid differs from perf_preds");
    }
  }
  return rep;
}

inline void require_valid(const Dataset& ds, TaskKind task, ValidationOptions opts = {}) {
  const auto rep = validate_dataset(ds, task, opts);
  if (!rep.ok()) {
    std::string msg = "invalid dataset: " + rep.violations.front();
    if (rep.violations.size() > 1) {
      msg += " (and " + std::to_string(rep.violations.size() - 1) + " more)";
    }
    throw ValidationError(msg);
  }
}

// ---------------------------------------------------------------------------
// Row selection and splitting

namespace detail {

template <typename T>
std::vector<T> take(const std::vector<T>& v, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v[i]);
  return out;
}

}  // namespace detail

inline FeatureMatrix subset(const FeatureMatrix& X, std::span<const std::size_t> idx) {
  FeatureMatrix out{idx.size(), X.column_names, {}};
  out.values.reserve(idx.size() * X.cols());
  for (auto i : idx) {
    const auto r = X.row(i);
    out.values.insert(out.values.end(), r.begin(), r.end());
  }
  return out;
}

inline GroupAssignment subset(const GroupAssignment& g, std::span<const std::size_t> idx) {
  GroupAssignment out{detail::take(g.ids, idx), g.labels, g.mode, {}};
  for (const auto& a : g.attributes) out.attributes.push_back(subset(a, idx));
  return out;
}

inline SurvivalCurves subset(const SurvivalCurves& c, std::span<const std::size_t> idx) {
  SurvivalCurves out{c.grid, idx.size(), {}};
  out.probs.reserve(idx.size() * c.cols());
  for (auto i : idx) {
    const auto r = c.row(i);
    out.probs.insert(out.probs.end(), r.begin(), r.end());
  }
  return out;
}

inline PredictionSet subset(const PredictionSet& p, std::span<const std::size_t> idx) {
  if (const auto* s = std::get_if<ScorePredictions>(&p)) {
    return ScorePredictions{detail::take(s->values, idx), s->kind};
  }
  return subset(std::get<SurvivalCurves>(p), idx);
}

inline Labels subset(const Labels& l, std::span<const std::size_t> idx) {
  return std::visit(
      [&](const auto& v) -> Labels {
        if constexpr (std::is_same_v<std::decay_t<decltype(v)>, std::monostate>) {
          return std::monostate{};
        } else {
          return detail::take(v, idx);
        }
      },
      l);
}

inline Dataset subset(const Dataset& ds, std::span<const std::size_t> idx) {
  Dataset out;
  out.features = subset(ds.features, idx);
  out.groups = subset(ds.groups, idx);
  out.labels = subset(ds.labels, idx);
  out.perf = subset(ds.perf, idx);
  if (ds.fair) out.fair = subset(*ds.fair, idx);
  return out;
}

struct SplitIndices {
  std::vector<std::size_t> fit;
  std::vector<std::size_t> test;
};

/// Stratified, seeded partition of `groups` into a fit part and a test part of
/// round(n * test_fraction) rows. Per-group test quotas use largest remainders
/// and leave at least one row of every group on the fit side.
inline SplitIndices split_indices(const GroupAssignment& groups, double test_fraction,
                                  std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ValidationError("test_fraction must lie in (0, 1)");
  }
  const std::size_t n = groups.size();
  const auto G = static_cast<std::size_t>(groups.count());
  std::vector<std::vector<std::size_t>> members(G);
  for (std::size_t i = 0; i < n; ++i) {
    const int id = groups.ids[i];
    if (id < 0 || static_cast<std::size_t>(id) >= G) throw ValidationError("group id out of range");
    members[static_cast<std::size_t>(id)].push_back(i);
  }
  for (std::size_t k = 0; k < G; ++k) {
    if (members[k].empty()) {
      throw ValidationError("cannot split: group '" + groups.labels[k] + "' has no rows");
    }
  }

  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
  std::vector<std::size_t> quota(G);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < G; ++k) {
    const double exact = static_cast<double>(members[k].size()) * test_fraction;
    quota[k] = std::min(static_cast<std::size_t>(std::floor(exact)), members[k].size() - 1);
    assigned += quota[k];
    remainders.emplace_back(exact - std::floor(exact), k);
  }
  // Largest remainder first; ties resolved by group id.
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  while (assigned < n_test) {
    bool progressed = false;
    for (const auto& [rem, k] : remainders) {
      if (assigned == n_test) break;
      if (quota[k] + 1 < members[k].size()) {
        ++quota[k];
        ++assigned;
        progressed = true;
      }
    }
    if (!progressed) {
      throw ValidationError("cannot split: " + std::to_string(n_test) +
                            " test rows would leave a group empty on the fit side");
    }
  }
  while (assigned > n_test) {
    for (auto it = remainders.rbegin(); it != remainders.rend() && assigned > n_test; ++it) {
      if (quota[it->second] > 0) {
        --quota[it->second];
        --assigned;
      }
    }
  }

  Rng rng(seed);
  SplitIndices out;
  for (std::size_t k = 0; k < G; ++k) {
    auto m = members[k];
    rng.shuffle(m);
    out.test.insert(out.test.end(), m.begin(), m.begin() + static_cast<std::ptrdiff_t>(quota[k]));
    out.fit.insert(out.fit.end(), m.begin() + static_cast<std::ptrdiff_t>(quota[k]), m.end());
  }
  std::sort(out.fit.begin(), out.fit.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

/// Returns (fit, test).
inline std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, double test_fraction,
                                                    std::uint64_t seed) {
  if (ds.groups.size() != ds.size()) throw ValidationError("groups length differs from features");
  const auto idx = split_indices(ds.groups, test_fraction, seed);
  return {subset(ds, idx.fit), subset(ds, idx.test)};
}

// ---------------------------------------------------------------------------

/// Linear interpolation of curves onto `target`; beyond the source horizon
/// the last value is held.
inline SurvivalCurves resample_curves(const SurvivalCurves& src, const TimeGrid& target) {
  if (src.grid == target) return src;
  const auto& ts = src.grid.times;
  SurvivalCurves out{target, src.rows, std::vector<double>(src.rows * target.size())};
  for (std::size_t j = 0; j < target.size(); ++j) {
    const double t = target.times[j];
    const auto hi = static_cast<std::size_t>(std::upper_bound(ts.begin(), ts.end(), t) - ts.begin());
    for (std::size_t i = 0; i < src.rows; ++i) {
      const auto r = src.row(i);
      double v;
      if (hi == 0) {
        v = 1.0;
      } else if (hi == ts.size()) {
        v = r.back();
      } else {
        const double w = (t - ts[hi - 1]) / (ts[hi] - ts[hi - 1]);
        v = (1.0 - w) * r[hi - 1] + w * r[hi];
      }
      out.probs[i * target.size() + j] = v;
    }
  }
  return out;
}

}  // namespace fairmix
