#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fairmix/core_data.hpp"
#include "fairmix/fairness.hpp"
#include "fairmix/objective.hpp"
#include "fairmix/optimizer.hpp"
#include "fairmix/rng.hpp"

namespace fairmix {

struct FitResult {
  CombinerParams params;
  double objective_value = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string status;
  std::vector<std::pair<int, double>> trace;
};

/// Columns the simple expert uses; an empty request means all feature columns.
inline std::vector<std::string> resolve_expert_features(const FeatureMatrix& X,
                                                        const std::vector<std::string>& requested) {
  if (requested.empty()) return X.column_names;
  for (const auto& name : requested) {
    if (!X.column_index(name)) throw ValidationError("expert feature '" + name + "' not found");
  }
  return requested;
}

/// Minimizes the objective over the packed combiner parameters. The first
/// start is the neutral initialization; further starts draw gate and expert
/// entries from uniform(-0.5, 0.5) (alpha from 0.5 + that) with a generator
/// seeded by `seed`. The lowest final objective wins.
///
/// For lambda > 1 each start first solves lambda = 1, 10, 100, ... below the
/// target and warm-starts the next weight from that solution. The exact
/// penalties are nonsmooth where they vanish, and a cold start at a large
/// weight stalls on that kink far from the fidelity optimum. Iterations are
/// summed over the stages; status and convergence are those of the last.
inline FitResult fit(const ObjectiveSpec& spec, const Dataset& ds, const OptimizerOptions& opts = {},
                     std::uint64_t seed = 0, const std::vector<std::string>& expert_features = {}) {
  if (!opts.valid()) throw ValidationError("invalid optimizer options");
  const auto layout = initial_params(spec.variant, ds.features.column_names,
                                     resolve_expert_features(ds.features, expert_features));
  std::vector<Objective> stages;
  for (double w = 1.0; w < spec.lambda; w *= 10.0) {
    ObjectiveSpec s = spec;
    s.lambda = w;
    stages.emplace_back(s, ds, layout);
  }
  stages.emplace_back(spec, ds, layout);
  const auto packed = pack_params(layout, spec.variant);

  Rng rng(seed);
  FitResult best;
  bool have_best = false;
  for (int start = 0; start < opts.restarts; ++start) {
    std::vector<double> x0 = packed.values;
    if (start > 0) {
      for (std::size_t i = 0; i < x0.size(); ++i) {
        const double u = rng.uniform(-0.5, 0.5);
        x0[i] = std::isfinite(packed.lower[i]) ? std::clamp(0.5 + u, packed.lower[i], packed.upper[i]) : u;
      }
    }
    MinimizeResult r;
    int iterations = 0;
    for (const auto& stage : stages) {
      r = minimize_box_lbfgs(stage, std::move(x0), packed.lower, packed.upper, opts);
      iterations += r.iterations;
      x0 = r.x;
    }
    if (!have_best || r.value < best.objective_value) {
      best.params = unpack_params(layout, spec.variant, r.x);
      best.objective_value = r.value;
      best.iterations = iterations;
      best.converged = r.converged;
      best.status = std::move(r.status);
      best.trace = std::move(r.trace);
      have_best = true;
    }
  }
  return best;
}

/// Fits the simple expert to the labels alone (logistic log-loss, least
/// squares, or the unit-baseline exponential likelihood for survival).
/// Serves as the fair model of the two-pretrained variants when none is
/// supplied.
inline SimpleExpertParams fit_expert_to_labels(TaskKind task, const Dataset& ds,
                                               const std::vector<std::string>& subset,
                                               const OptimizerOptions& opts = {}) {
  if (!ds.has_labels()) throw ValidationError("fitting an expert to labels needs labels");
  auto layout = SimpleExpertParams::zeros(resolve_expert_features(ds.features, subset));
  const std::size_t n = ds.size();
  const auto& X = ds.features;

  auto loss = [&](std::span<const double> gamma) {
    SimpleExpertParams p = layout;
    p.gamma.assign(gamma.begin(), gamma.end());
    const SimpleExpert e(p, X.column_names);
    double total = 0.0;
    if (task == TaskKind::binary_classification) {
      const auto& y = std::get<std::vector<int>>(ds.labels);
      for (std::size_t i = 0; i < n; ++i) {
        const double z = e.linear_predictor(X.row(i));
        // log(1 + exp(z)) - y z, overflow-safe
        const double softplus = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
        total += softplus - (y[i] ? z : 0.0);
      }
    } else if (task == TaskKind::regression) {
      const auto& y = std::get<std::vector<double>>(ds.labels);
      for (std::size_t i = 0; i < n; ++i) total += se_fidelity(e.linear(X.row(i)), y[i]);
    } else {
      const auto& y = std::get<std::vector<SurvivalOutcome>>(ds.labels);
      for (std::size_t i = 0; i < n; ++i) {
        const double lp = std::clamp(e.linear_predictor(X.row(i)), -kCoxLinearPredictorLimit,
                                     kCoxLinearPredictorLimit);
        total += y[i].time * std::exp(lp) - (y[i].event ? lp : 0.0);
      }
    }
    double ridge = 0.0;
    for (double g : gamma) ridge += g * g;
    return total / static_cast<double>(n) + 1e-6 * ridge;
  };
  const auto r = minimize_box_lbfgs(loss, layout.gamma, {}, {}, opts);
  layout.gamma = r.x;
  return layout;
}

struct FeatureScore {
  std::string feature;
  double penalty = 0.0;
};

/// Fits a one-feature expert to the labels for every candidate column and
/// scores the fairness penalty of its predictions on `ds`, best first.
inline std::vector<FeatureScore> rank_single_features(TaskKind task, const Dataset& ds,
                                                      const std::vector<std::string>& candidates,
                                                      const OptimizerOptions& opts = {}) {
  std::vector<FeatureScore> out;
  const auto names = candidates.empty() ? ds.features.column_names : candidates;
  const TimeGrid* grid = nullptr;
  if (const auto* c = std::get_if<SurvivalCurves>(&ds.perf)) grid = &c->grid;
  for (const auto& name : names) {
    const auto params = fit_expert_to_labels(task, ds, {name}, opts);
    const auto preds = expert_predictions(task, params, ds.features, grid);
    double pen = 0.0;
    switch (task) {
      case TaskKind::binary_classification:
        pen = sp_penalty(std::get<ScorePredictions>(preds).values, ds.groups);
        break;
      case TaskKind::regression:
        pen = sp_auc_penalty(std::get<ScorePredictions>(preds).values, ds.groups);
        break;
      case TaskKind::survival:
        pen = gf_integrated(std::get<SurvivalCurves>(preds), ds.groups);
        break;
    }
    out.push_back({name, pen});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.penalty < b.penalty; });
  return out;
}

}  // namespace fairmix
