#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "fairmix/core_data.hpp"
#include "fairmix/error.hpp"
#include "fairmix/numerics.hpp"

namespace fairmix {

/// Coefficients over a named feature subset; the last entry of gamma is the
/// intercept.
struct SimpleExpertParams {
  std::vector<double> gamma;
  std::vector<std::string> feature_subset;

  static SimpleExpertParams zeros(std::vector<std::string> subset) {
    SimpleExpertParams p;
    p.gamma.assign(subset.size() + 1, 0.0);
    p.feature_subset = std::move(subset);
    return p;
  }

  bool valid() const {
    if (gamma.size() != feature_subset.size() + 1) return false;
    return std::all_of(gamma.begin(), gamma.end(), [](double g) { return std::isfinite(g); });
  }
};

// Cox linear predictors are clamped to this magnitude before exponentiation.
inline constexpr double kCoxLinearPredictorLimit = 30.0;

/// Simple expert bound to a feature layout; column lookup happens once.
class SimpleExpert {
 public:
  SimpleExpert(const SimpleExpertParams& params, const std::vector<std::string>& columns)
      : gamma_(params.gamma) {
    if (params.gamma.size() != params.feature_subset.size() + 1) {
      throw ValidationError("expert needs |gamma| = |feature_subset| + 1");
    }
    for (const auto& name : params.feature_subset) {
      auto it = std::find(columns.begin(), columns.end(), name);
      if (it == columns.end()) throw ValidationError("expert feature '" + name + "' not found");
      index_.push_back(static_cast<std::size_t>(it - columns.begin()));
    }
  }

  double linear_predictor(std::span<const double> x) const {
    double z = gamma_.back();
    for (std::size_t k = 0; k < index_.size(); ++k) z += x[index_[k]] * gamma_[k];
    return z;
  }

  double logistic(std::span<const double> x) const { return sigmoid(linear_predictor(x)); }

  double linear(std::span<const double> x) const { return linear_predictor(x); }

  // S(t) = exp(-t exp(x.gamma)), unit baseline hazard.
  void cox_curve(std::span<const double> x, const TimeGrid& grid, std::span<double> out) const {
    const double lp = std::clamp(linear_predictor(x), -kCoxLinearPredictorLimit,
                                 kCoxLinearPredictorLimit);
    const double hazard = std::exp(lp);
    for (std::size_t j = 0; j < grid.size(); ++j) out[j] = std::exp(-grid.times[j] * hazard);
  }

 private:
  std::vector<double> gamma_;
  std::vector<std::size_t> index_;
};

inline double logistic_expert(const SimpleExpertParams& p, const FeatureMatrix& X, std::size_t i) {
  return SimpleExpert(p, X.column_names).logistic(X.row(i));
}

inline double linear_expert(const SimpleExpertParams& p, const FeatureMatrix& X, std::size_t i) {
  return SimpleExpert(p, X.column_names).linear(X.row(i));
}

inline std::vector<double> cox_expert_curve(const SimpleExpertParams& p, const FeatureMatrix& X,
                                            std::size_t i, const TimeGrid& grid) {
  std::vector<double> out(grid.size());
  SimpleExpert(p, X.column_names).cox_curve(X.row(i), grid, out);
  return out;
}

}  // namespace fairmix
