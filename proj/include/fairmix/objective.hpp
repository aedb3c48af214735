#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairmix/core_data.hpp"
#include "fairmix/error.hpp"
#include "fairmix/fairness.hpp"
#include "fairmix/gating.hpp"
#include "fairmix/losses.hpp"
#include "fairmix/numerics.hpp"
#include "fairmix/simple_experts.hpp"

namespace fairmix {

enum class VariantKind {
  one_pretrained_mixture,
  one_pretrained_moe,
  two_pretrained_mixture,
  two_pretrained_moe,
  frappe_baseline,
};

inline bool uses_expert(VariantKind v) {
  return v == VariantKind::one_pretrained_mixture || v == VariantKind::one_pretrained_moe;
}

inline bool uses_fair_model(VariantKind v) {
  return v == VariantKind::two_pretrained_mixture || v == VariantKind::two_pretrained_moe;
}

inline bool uses_logistic_gate(VariantKind v) {
  return v == VariantKind::one_pretrained_moe || v == VariantKind::two_pretrained_moe;
}

/// Learnable state of a combiner. `expert` is set for the one-pretrained
/// variants, `theta` (d coefficients + intercept) for the FRAPPE baseline.
struct CombinerParams {
  GateParams gate;
  std::optional<SimpleExpertParams> expert;
  std::optional<std::vector<double>> theta;
};

struct ObjectiveSpec {
  TaskKind task = TaskKind::binary_classification;
  VariantKind variant = VariantKind::one_pretrained_moe;
  double lambda = 1.0;
  FidelityKind fidelity = FidelityKind::cross_entropy;
  FairnessKind fairness = FairnessKind::statistical_parity;
  IntegratorConfig integrator;
  // SP-AUC only: bandwidth of the smoothed exceedance as a fraction of the
  // perf predictions' standard deviation. 0 evaluates the exact rank-based
  // penalty, which is piecewise constant in the parameters.
  double sp_auc_smoothing = 0.05;
};

inline FidelityKind default_fidelity(TaskKind task) {
  switch (task) {
    case TaskKind::binary_classification:
      return FidelityKind::cross_entropy;
    case TaskKind::regression:
      return FidelityKind::squared_error;
    case TaskKind::survival:
      break;
  }
  return FidelityKind::integrated_survival_se;
}

inline FairnessKind default_fairness(TaskKind task) {
  switch (task) {
    case TaskKind::binary_classification:
      return FairnessKind::statistical_parity;
    case TaskKind::regression:
      return FairnessKind::statistical_parity_auc;
    case TaskKind::survival:
      break;
  }
  return FairnessKind::group_fairness_survival;
}

inline ObjectiveSpec default_spec(TaskKind task, VariantKind variant, double lambda) {
  ObjectiveSpec s;
  s.task = task;
  s.variant = variant;
  s.lambda = lambda;
  s.fidelity = default_fidelity(task);
  s.fairness = default_fairness(task);
  return s;
}

inline void check_spec(const ObjectiveSpec& s) {
  if (!(s.lambda >= 0.0) || !std::isfinite(s.lambda)) throw ValidationError("lambda must be finite and >= 0");
  if (!s.integrator.valid()) throw ValidationError("invalid integrator configuration");
  if (!(s.sp_auc_smoothing >= 0.0)) throw ValidationError("sp_auc_smoothing must be >= 0");
  const bool survival = s.task == TaskKind::survival;
  const bool survival_fid = s.fidelity == FidelityKind::integrated_survival_se;
  const bool survival_fair = s.fairness == FairnessKind::group_fairness_survival;
  if (survival != survival_fid) throw ValidationError("fidelity kind is incompatible with the task");
  if (survival != survival_fair) throw ValidationError("fairness kind is incompatible with the task");
  const bool ce = s.fidelity == FidelityKind::cross_entropy ||
                  s.fidelity == FidelityKind::cross_entropy_swapped;
  if (ce && s.task != TaskKind::binary_classification) {
    throw ValidationError("cross-entropy fidelity needs a classification task");
  }
  if (survival && s.variant == VariantKind::frappe_baseline) {
    throw ValidationError("the FRAPPE baseline does not support survival tasks");
  }
}

inline void check_params(const CombinerParams& p, VariantKind v, std::size_t n_features) {
  if (v != VariantKind::frappe_baseline) {
    if (!p.gate.valid()) throw ValidationError("gate parameters invalid");
    const bool logistic = p.gate.variant == GateVariant::logistic;
    if (logistic != uses_logistic_gate(v)) throw ValidationError("gate variant does not match combiner variant");
    if (logistic && p.gate.beta.size() != n_features) {
      throw ValidationError("gate has " + std::to_string(p.gate.beta.size()) + " coefficients for " +
                            std::to_string(n_features) + " features");
    }
  }
  if (uses_expert(v) != p.expert.has_value()) throw ValidationError("expert presence does not match variant");
  if (p.expert && !p.expert->valid()) throw ValidationError("expert parameters invalid");
  if ((v == VariantKind::frappe_baseline) != p.theta.has_value()) {
    throw ValidationError("theta presence does not match variant");
  }
  if (p.theta && p.theta->size() != n_features + 1) throw ValidationError("theta needs d + 1 entries");
}

/// Neutral starting point: alpha = 0.5 (or a zero-logit gate), zero expert and
/// zero perturbation.
inline CombinerParams initial_params(VariantKind v, const std::vector<std::string>& columns,
                                     const std::vector<std::string>& expert_subset) {
  CombinerParams p;
  if (uses_logistic_gate(v)) {
    p.gate = GateParams::logistic(std::vector<double>(columns.size(), 0.0), 0.0);
  } else {
    p.gate = GateParams::constant(v == VariantKind::frappe_baseline ? 1.0 : 0.5);
  }
  if (uses_expert(v)) p.expert = SimpleExpertParams::zeros(expert_subset);
  if (v == VariantKind::frappe_baseline) p.theta = std::vector<double>(columns.size() + 1, 0.0);
  return p;
}

// ---------------------------------------------------------------------------
// Parameter packing

struct PackedParams {
  std::vector<double> values;
  std::vector<double> lower;
  std::vector<double> upper;
};

/// Flattens the learnables as [gate, expert, theta]; only a constant alpha is
/// bounded (to [0, 1]).
inline PackedParams pack_params(const CombinerParams& p, VariantKind v) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  PackedParams out;
  auto push = [&](double x, double lo, double hi) {
    out.values.push_back(x);
    out.lower.push_back(lo);
    out.upper.push_back(hi);
  };
  if (v != VariantKind::frappe_baseline) {
    if (p.gate.variant == GateVariant::constant) {
      push(p.gate.alpha, 0.0, 1.0);
    } else {
      for (double b : p.gate.beta) push(b, -inf, inf);
      push(p.gate.beta0, -inf, inf);
    }
  }
  if (p.expert) {
    for (double g : p.expert->gamma) push(g, -inf, inf);
  }
  if (p.theta) {
    for (double t : *p.theta) push(t, -inf, inf);
  }
  return out;
}

/// Inverse of pack_params, using `layout` for shapes and names.
inline CombinerParams unpack_params(const CombinerParams& layout, VariantKind v,
                                    std::span<const double> x) {
  CombinerParams p = layout;
  std::size_t k = 0;
  auto next = [&]() {
    if (k >= x.size()) throw ValidationError("packed parameter vector too short");
    return x[k++];
  };
  if (v != VariantKind::frappe_baseline) {
    if (p.gate.variant == GateVariant::constant) {
      p.gate.alpha = next();
    } else {
      for (double& b : p.gate.beta) b = next();
      p.gate.beta0 = next();
    }
  }
  if (p.expert) {
    for (double& g : p.expert->gamma) g = next();
  }
  if (p.theta) {
    for (double& t : *p.theta) t = next();
  }
  if (k != x.size()) throw ValidationError("packed parameter vector too long");
  return p;
}

// ---------------------------------------------------------------------------
// Combiners

inline ScorePredictions combine_scores(const GateParams& gate, const FeatureMatrix& X,
                                       const ScorePredictions& perf, const ScorePredictions& second) {
  if (perf.size() != second.size() || perf.size() != X.rows) {
    throw ValidationError("combine_scores: length mismatch");
  }
  ScorePredictions out{std::vector<double>(perf.size()), perf.kind};
  for (std::size_t i = 0; i < perf.size(); ++i) {
    const double a = gate_weight(gate, X.row(i));
    out.values[i] = a * perf.values[i] + (1.0 - a) * second.values[i];
  }
  return out;
}

inline SurvivalCurves combine_survival(const GateParams& gate, const FeatureMatrix& X,
                                       const SurvivalCurves& perf, const SurvivalCurves& second) {
  if (!(perf.grid == second.grid)) throw ValidationError("combine_survival: time grids differ");
  if (perf.rows != second.rows || perf.rows != X.rows) throw ValidationError("combine_survival: row count mismatch");
  SurvivalCurves out{perf.grid, perf.rows, std::vector<double>(perf.probs.size())};
  for (std::size_t i = 0; i < perf.rows; ++i) {
    const double a = gate_weight(gate, X.row(i));
    const auto p = perf.row(i);
    const auto s = second.row(i);
    auto o = out.row(i);
    for (std::size_t j = 0; j < o.size(); ++j) o[j] = a * p[j] + (1.0 - a) * s[j];
  }
  return out;
}

/// perf + theta . [x, 1]; for probabilities the shift is applied to the
/// clamped logit so outputs stay in (0, 1).
inline ScorePredictions frappe_combine(std::span<const double> theta, const FeatureMatrix& X,
                                       const ScorePredictions& perf, TaskKind task) {
  if (task == TaskKind::survival) throw ValidationError("the FRAPPE baseline does not support survival tasks");
  if (theta.size() != X.cols() + 1) throw ValidationError("theta needs d + 1 entries");
  if (perf.size() != X.rows) throw ValidationError("frappe_combine: length mismatch");
  ScorePredictions out{std::vector<double>(perf.size()), perf.kind};
  for (std::size_t i = 0; i < perf.size(); ++i) {
    const auto x = X.row(i);
    double shift = theta.back();
    for (std::size_t k = 0; k < x.size(); ++k) shift += theta[k] * x[k];
    if (task == TaskKind::binary_classification) {
      out.values[i] = sigmoid(logit(clamp_prob(perf.values[i])) + shift);
    } else {
      out.values[i] = perf.values[i] + shift;
    }
  }
  return out;
}

/// Simple-expert outputs for every row of X.
inline PredictionSet expert_predictions(TaskKind task, const SimpleExpertParams& params,
                                        const FeatureMatrix& X, const TimeGrid* grid = nullptr) {
  const SimpleExpert expert(params, X.column_names);
  if (task == TaskKind::survival) {
    if (grid == nullptr) throw ValidationError("survival expert needs a time grid");
    SurvivalCurves c{*grid, X.rows, std::vector<double>(X.rows * grid->size())};
    for (std::size_t i = 0; i < X.rows; ++i) expert.cox_curve(X.row(i), *grid, c.row(i));
    return c;
  }
  ScorePredictions s{std::vector<double>(X.rows),
                     task == TaskKind::binary_classification ? ScoreKind::probability : ScoreKind::regression};
  for (std::size_t i = 0; i < X.rows; ++i) {
    s.values[i] = task == TaskKind::binary_classification ? expert.logistic(X.row(i)) : expert.linear(X.row(i));
  }
  return s;
}

/// Combined predictions of a fitted combiner on (X, perf[, fair]).
inline PredictionSet combined_predictions(TaskKind task, VariantKind v, const CombinerParams& p,
                                          const FeatureMatrix& X, const PredictionSet& perf,
                                          const std::optional<PredictionSet>& fair) {
  if (v == VariantKind::frappe_baseline) {
    const auto* s = std::get_if<ScorePredictions>(&perf);
    if (s == nullptr || !p.theta) throw ValidationError("the FRAPPE baseline needs score predictions and theta");
    return frappe_combine(*p.theta, X, *s, task);
  }
  PredictionSet second;
  if (uses_expert(v)) {
    if (!p.expert) throw ValidationError("one-pretrained variant needs expert parameters");
    const TimeGrid* grid = nullptr;
    if (const auto* c = std::get_if<SurvivalCurves>(&perf)) grid = &c->grid;
    second = expert_predictions(task, *p.expert, X, grid);
  } else {
    if (!fair) throw ValidationError("two-pretrained variant needs fair-model predictions");
    second = *fair;
  }
  if (task == TaskKind::survival) {
    const auto* sp = std::get_if<SurvivalCurves>(&perf);
    const auto* ss = std::get_if<SurvivalCurves>(&second);
    if (sp == nullptr || ss == nullptr) throw ValidationError("survival task needs curve predictions");
    return combine_survival(p.gate, X, *sp, *ss);
  }
  const auto* sp = std::get_if<ScorePredictions>(&perf);
  const auto* ss = std::get_if<ScorePredictions>(&second);
  if (sp == nullptr || ss == nullptr) throw ValidationError("score task needs score predictions");
  return combine_scores(p.gate, X, *sp, *ss);
}

// ---------------------------------------------------------------------------

/// Objective over a fixed dataset: mean fidelity of the combined predictions
/// to the perf predictions plus lambda times the fairness penalty. Holds a
/// reference to `ds`, which must outlive it.
class Objective {
 public:
  Objective(ObjectiveSpec spec, const Dataset& ds, CombinerParams layout)
      : spec_(spec), ds_(ds), layout_(std::move(layout)) {
    check_spec(spec_);
    check_params(layout_, spec_.variant, ds_.features.cols());
    if (ds_.groups.size() != ds_.size() || prediction_count(ds_.perf) != ds_.size()) {
      throw ValidationError("objective: dataset components disagree on n");
    }
    if (uses_fair_model(spec_.variant) && !ds_.fair) {
      throw ValidationError("two-pretrained variant needs fair-model predictions");
    }
    if (spec_.fairness == FairnessKind::statistical_parity_auc && spec_.sp_auc_smoothing > 0.0) {
      const auto& v = std::get<ScorePredictions>(ds_.perf).values;
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double var = 0.0;
      for (double x : v) var += (x - mean) * (x - mean);
      const double sd = std::sqrt(var / static_cast<double>(v.size()));
      bandwidth_ = spec_.sp_auc_smoothing * (sd > 0.0 ? sd : 1.0);
    }
  }

  const ObjectiveSpec& spec() const { return spec_; }
  const CombinerParams& layout() const { return layout_; }

  double operator()(std::span<const double> packed) const {
    return evaluate(unpack_params(layout_, spec_.variant, packed));
  }

  double evaluate(const CombinerParams& p) const {
    const auto combined = combined_predictions(spec_.task, spec_.variant, p, ds_.features, ds_.perf, ds_.fair);
    return fidelity(combined) + (spec_.lambda > 0.0 ? spec_.lambda * penalty(combined) : 0.0);
  }

  double fidelity(const PredictionSet& combined) const {
    const std::size_t n = ds_.size();
    double total = 0.0;
    if (spec_.task == TaskKind::survival) {
      const auto& c = std::get<SurvivalCurves>(combined);
      const auto& perf = std::get<SurvivalCurves>(ds_.perf);
      for (std::size_t i = 0; i < n; ++i) total += survival_fidelity(c.row(i), perf.row(i), c.grid);
    } else {
      const auto& c = std::get<ScorePredictions>(combined).values;
      const auto& perf = std::get<ScorePredictions>(ds_.perf).values;
      for (std::size_t i = 0; i < n; ++i) total += score_fidelity(spec_.fidelity, c[i], perf[i]);
    }
    return total / static_cast<double>(n);
  }

  double penalty(const PredictionSet& combined) const {
    switch (spec_.fairness) {
      case FairnessKind::statistical_parity:
        return sp_penalty(std::get<ScorePredictions>(combined).values, ds_.groups);
      case FairnessKind::statistical_parity_auc: {
        const auto& v = std::get<ScorePredictions>(combined).values;
        if (bandwidth_ > 0.0) return sp_auc_smoothed(v, ds_.groups, bandwidth_);
        return sp_auc_penalty(v, ds_.groups, spec_.integrator);
      }
      case FairnessKind::group_fairness_survival:
        break;
    }
    return gf_integrated(std::get<SurvivalCurves>(combined), ds_.groups);
  }

 private:
  ObjectiveSpec spec_;
  const Dataset& ds_;
  CombinerParams layout_;
  double bandwidth_ = 0.0;
};

inline double evaluate_objective(const ObjectiveSpec& spec, const CombinerParams& params, const Dataset& ds) {
  return Objective(spec, ds, params).evaluate(params);
}

}  // namespace fairmix
