#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "fairmix/core_data.hpp"
#include "fairmix/error.hpp"
#include "fairmix/numerics.hpp"

namespace fairmix {

enum class GateVariant { constant, logistic };

/// Mixture weight on the performance model: a fixed alpha, or
/// sigmoid(x . beta + beta0) over the full feature row.
struct GateParams {
  GateVariant variant = GateVariant::constant;
  double alpha = 0.5;
  std::vector<double> beta;
  double beta0 = 0.0;

  static GateParams constant(double a) { return {GateVariant::constant, a, {}, 0.0}; }
  static GateParams logistic(std::vector<double> b, double b0) {
    return {GateVariant::logistic, 0.0, std::move(b), b0};
  }

  bool valid() const {
    if (variant == GateVariant::constant) return alpha >= 0.0 && alpha <= 1.0;
    for (double b : beta) {
      if (!std::isfinite(b)) return false;
    }
    return std::isfinite(beta0);
  }
};

inline double gate_weight(const GateParams& p, std::span<const double> x) {
  if (p.variant == GateVariant::constant) return p.alpha;
  if (x.size() != p.beta.size()) {
    throw ValidationError("gate expects " + std::to_string(p.beta.size()) + " features, got " +
                          std::to_string(x.size()));
  }
  double z = p.beta0;
  for (std::size_t k = 0; k < x.size(); ++k) z += x[k] * p.beta[k];
  return sigmoid(z);
}

inline std::vector<double> gate_weights(const GateParams& p, const FeatureMatrix& X) {
  std::vector<double> w(X.rows);
  for (std::size_t i = 0; i < X.rows; ++i) w[i] = gate_weight(p, X.row(i));
  return w;
}

}  // namespace fairmix
