#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fairmix/core_data.hpp"
#include "fairmix/error.hpp"
#include "fairmix/fairness.hpp"
#include "fairmix/numerics.hpp"

namespace fairmix {

/// Metric name -> value, in a fixed per-task order.
struct MetricReport {
  std::vector<std::pair<std::string, double>> values;

  bool contains(const std::string& name) const {
    return std::any_of(values.begin(), values.end(), [&](const auto& kv) { return kv.first == name; });
  }

  double at(const std::string& name) const {
    for (const auto& [k, v] : values) {
      if (k == name) return v;
    }
    throw ValidationError("metric '" + name + "' not in report");
  }
};

// Thresholding rule: a prediction is positive when pred >= threshold.

inline double accuracy(std::span<const double> preds, std::span<const int> labels, double threshold = 0.5) {
  if (preds.empty()) throw ValidationError("accuracy of an empty sample");
  if (preds.size() != labels.size()) throw ValidationError("accuracy: length mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    hits += static_cast<int>(preds[i] >= threshold) == labels[i] ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

/// Range of positive-prediction rates across groups.
inline double dp_gap(std::span<const double> preds, const GroupAssignment& groups, double threshold = 0.5) {
  double worst = 0.0;
  for (const GroupAssignment* part : groups.partitions()) {
    detail::check_partition(*part, preds.size());
    const auto sizes = part->group_sizes();
    std::vector<double> pos(sizes.size(), 0.0);
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (preds[i] >= threshold) pos[static_cast<std::size_t>(part->ids[i])] += 1.0;
    }
    double lo = 1.0, hi = 0.0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      const double rate = pos[k] / static_cast<double>(sizes[k]);
      lo = std::min(lo, rate);
      hi = std::max(hi, rate);
    }
    worst = std::max(worst, hi - lo);
  }
  return worst;
}

/// TPR range plus FPR range across groups.
inline double eo_gap(std::span<const double> preds, std::span<const int> labels, const GroupAssignment& groups,
                     double threshold = 0.5) {
  if (preds.size() != labels.size()) throw ValidationError("eo_gap: length mismatch");
  double worst = 0.0;
  for (const GroupAssignment* part : groups.partitions()) {
    detail::check_partition(*part, preds.size());
    const auto G = static_cast<std::size_t>(part->count());
    std::vector<double> tp(G, 0.0), pos(G, 0.0), fp(G, 0.0), neg(G, 0.0);
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const auto k = static_cast<std::size_t>(part->ids[i]);
      const bool hit = preds[i] >= threshold;
      if (labels[i] == 1) {
        pos[k] += 1.0;
        tp[k] += hit ? 1.0 : 0.0;
      } else {
        neg[k] += 1.0;
        fp[k] += hit ? 1.0 : 0.0;
      }
    }
    double tpr_lo = 1.0, tpr_hi = 0.0, fpr_lo = 1.0, fpr_hi = 0.0;
    for (std::size_t k = 0; k < G; ++k) {
      if (pos[k] == 0.0) throw ValidationError("eo_gap: TPR undefined for group '" + part->labels[k] + "' (no positive labels)");
      if (neg[k] == 0.0) throw ValidationError("eo_gap: FPR undefined for group '" + part->labels[k] + "' (no negative labels)");
      const double tpr = tp[k] / pos[k];
      const double fpr = fp[k] / neg[k];
      tpr_lo = std::min(tpr_lo, tpr);
      tpr_hi = std::max(tpr_hi, tpr);
      fpr_lo = std::min(fpr_lo, fpr);
      fpr_hi = std::max(fpr_hi, fpr);
    }
    worst = std::max(worst, (tpr_hi - tpr_lo) + (fpr_hi - fpr_lo));
  }
  return worst;
}

inline double mse(std::span<const double> preds, std::span<const double> targets) {
  if (preds.empty()) throw ValidationError("mse of an empty sample");
  if (preds.size() != targets.size()) throw ValidationError("mse: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) s += (preds[i] - targets[i]) * (preds[i] - targets[i]);
  return s / static_cast<double>(preds.size());
}

/// Harrell's concordance. A pair (i, j) is comparable when t_i < t_j and i had
/// an event; it is concordant when risk_i > risk_j, and tied risks count one
/// half. Runs in O(n log n) with a Fenwick tree over risk ranks.
inline double c_index(std::span<const double> risks, std::span<const SurvivalOutcome> outcomes) {
  const std::size_t n = risks.size();
  if (n != outcomes.size()) throw ValidationError("c_index: length mismatch");
  if (n < 2) throw ValidationError("c_index needs at least 2 instances");
  for (double r : risks) {
    if (!std::isfinite(r)) throw ValidationError("c_index: non-finite risk");
  }

  std::vector<double> distinct(risks.begin(), risks.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::vector<std::size_t> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    rank[i] = static_cast<std::size_t>(std::lower_bound(distinct.begin(), distinct.end(), risks[i]) - distinct.begin());
  }
  std::vector<long long> tree(distinct.size() + 1, 0);
  auto add = [&](std::size_t r) {
    for (std::size_t k = r + 1; k < tree.size(); k += k & (~k + 1)) ++tree[k];
  };
  auto below = [&](std::size_t r) {  // count with rank < r
    long long s = 0;
    for (std::size_t k = r; k > 0; k -= k & (~k + 1)) s += tree[k];
    return s;
  };

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return outcomes[a].time > outcomes[b].time; });

  long long comparable = 0, concordant = 0, tied = 0, inserted = 0;
  for (std::size_t lo = 0; lo < n;) {
    std::size_t hi = lo;
    while (hi < n && outcomes[order[hi]].time == outcomes[order[lo]].time) ++hi;
    for (std::size_t k = lo; k < hi; ++k) {
      const std::size_t i = order[k];
      if (!outcomes[i].event) continue;
      const long long less = below(rank[i]);
      const long long equal = below(rank[i] + 1) - less;
      comparable += inserted;
      concordant += less;
      tied += equal;
    }
    for (std::size_t k = lo; k < hi; ++k) add(rank[order[k]]);
    inserted += static_cast<long long>(hi - lo);
    lo = hi;
  }
  if (comparable == 0) throw ValidationError("c_index: no comparable pairs");
  return (2.0 * static_cast<double>(concordant) + static_cast<double>(tied)) / (2.0 * static_cast<double>(comparable));
}

/// Right-continuous step function, 1 before the first jump.
struct StepFunction {
  std::vector<double> times;
  std::vector<double> values;

  double operator()(double t) const {
    const auto k = std::upper_bound(times.begin(), times.end(), t) - times.begin();
    return k == 0 ? 1.0 : values[static_cast<std::size_t>(k - 1)];
  }

  double left_limit(double t) const {
    const auto k = std::lower_bound(times.begin(), times.end(), t) - times.begin();
    return k == 0 ? 1.0 : values[static_cast<std::size_t>(k - 1)];
  }
};

/// Product-limit estimate; jumps at the distinct event times.
inline StepFunction kaplan_meier(std::span<const SurvivalOutcome> outcomes) {
  std::vector<SurvivalOutcome> sorted(outcomes.begin(), outcomes.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.time < b.time; });
  StepFunction km;
  double s = 1.0;
  std::size_t at_risk = sorted.size();
  for (std::size_t lo = 0; lo < sorted.size();) {
    std::size_t hi = lo, events = 0;
    while (hi < sorted.size() && sorted[hi].time == sorted[lo].time) {
      events += sorted[hi].event ? 1 : 0;
      ++hi;
    }
    if (events > 0) {
      s *= 1.0 - static_cast<double>(events) / static_cast<double>(at_risk);
      km.times.push_back(sorted[lo].time);
      km.values.push_back(s);
    }
    at_risk -= hi - lo;
    lo = hi;
  }
  return km;
}

/// Integrated Brier score with inverse-probability-of-censoring weights:
/// BS(t) = mean_i [ S_i(t)^2 1{T_i <= t, event} / G(T_i-) + (1 - S_i(t))^2 1{T_i > t} / G(t) ]
/// with G the Kaplan-Meier estimate of the censoring distribution, integrated
/// over the grid by trapezoid and divided by tau.
inline double ibs(const SurvivalCurves& curves, std::span<const SurvivalOutcome> outcomes) {
  const std::size_t n = curves.rows;
  if (n != outcomes.size()) throw ValidationError("ibs: length mismatch");
  if (n == 0) throw ValidationError("ibs of an empty sample");
  if (std::none_of(outcomes.begin(), outcomes.end(), [](const auto& o) { return o.event; })) {
    throw ValidationError("ibs needs at least one observed event");
  }
  std::vector<SurvivalOutcome> flipped(outcomes.begin(), outcomes.end());
  for (auto& o : flipped) o.event = !o.event;
  const StepFunction cens = kaplan_meier(flipped);

  const auto& grid = curves.grid;
  const double tau = grid.tau();
  std::vector<double> bs(grid.size(), 0.0);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double t = grid.times[j];
    const double g_t = cens(t);
    if (g_t <= 0.0 && t < tau) {
      throw ValidationError("ibs: censoring survival reaches 0 at t = " + std::to_string(t) + " before tau = " +
                            std::to_string(tau));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double s = curves(i, j);
      if (outcomes[i].time <= t) {
        if (outcomes[i].event) sum += s * s / cens.left_limit(outcomes[i].time);
      } else if (g_t > 0.0) {
        sum += (1.0 - s) * (1.0 - s) / g_t;
      }
    }
    bs[j] = sum / static_cast<double>(n);
  }
  return trapezoid(grid.times, bs) / tau;
}

struct EvaluateOptions {
  double threshold = 0.5;
  // Grid index whose survival probability defines the C-index risk
  // 1 - S(t|x); defaults to the median grid index.
  std::optional<std::size_t> risk_time_index;
  IntegratorConfig integrator;
};

inline std::vector<double> survival_risks(const SurvivalCurves& c, std::optional<std::size_t> index) {
  const std::size_t j = index.value_or((c.cols() - 1) / 2);
  if (j >= c.cols()) throw ValidationError("risk time index outside the grid");
  std::vector<double> r(c.rows);
  for (std::size_t i = 0; i < c.rows; ++i) r[i] = 1.0 - c(i, j);
  return r;
}

/// Task metric suite on labelled data:
///   classification: accuracy, dp_gap, eo_gap
///   regression:     mse, sp_auc
///   survival:       c_index, ibs, gf_max, gf_avg (integrated penalty / tau)
inline MetricReport evaluate(TaskKind task, const Dataset& ds, const PredictionSet& combined,
                             const EvaluateOptions& opts = {}) {
  if (!ds.has_labels()) throw ValidationError("evaluation needs labels");
  if (prediction_count(combined) != ds.size()) throw ValidationError("evaluation: prediction count differs from dataset");
  MetricReport rep;
  switch (task) {
    case TaskKind::binary_classification: {
      const auto& p = std::get<ScorePredictions>(combined).values;
      const auto& y = std::get<std::vector<int>>(ds.labels);
      rep.values = {{"accuracy", accuracy(p, y, opts.threshold)},
                    {"dp_gap", dp_gap(p, ds.groups, opts.threshold)},
                    {"eo_gap", eo_gap(p, y, ds.groups, opts.threshold)}};
      break;
    }
    case TaskKind::regression: {
      const auto& p = std::get<ScorePredictions>(combined).values;
      const auto& y = std::get<std::vector<double>>(ds.labels);
      rep.values = {{"mse", mse(p, y)}, {"sp_auc", sp_auc_penalty(p, ds.groups, opts.integrator)}};
      break;
    }
    case TaskKind::survival: {
      const auto& c = std::get<SurvivalCurves>(combined);
      const auto& y = std::get<std::vector<SurvivalOutcome>>(ds.labels);
      const auto profile = gf_profile(c, ds.groups);
      rep.values = {{"c_index", c_index(survival_risks(c, opts.risk_time_index), y)},
                    {"ibs", ibs(c, y)},
                    {"gf_max", *std::max_element(profile.begin(), profile.end())},
                    {"gf_avg", trapezoid(c.grid.times, profile) / c.grid.tau()}};
      break;
    }
  }
  return rep;
}

}  // namespace fairmix
