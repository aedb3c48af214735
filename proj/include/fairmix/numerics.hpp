#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>

#include "fairmix/error.hpp"

namespace fairmix {

struct IntegratorConfig {
  std::size_t initial_points = 65;
  std::size_t max_points = 4097;
  double rel_tol = 1e-4;
  // Consecutive refinements that must each agree to rel_tol before stopping.
  // Step-shaped integrands can agree by coincidence at a single level.
  int confirm_levels = 3;

  bool valid() const {
    return initial_points >= 2 && max_points >= initial_points && rel_tol > 0.0 && confirm_levels >= 1;
  }
};

/// Overflow-safe logistic function.
inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

/// Trapezoidal rule over paired abscissae / ordinates.
inline double trapezoid(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t j = 1; j < x.size(); ++j) s += 0.5 * (x[j] - x[j - 1]) * (y[j] + y[j - 1]);
  return s;
}

/// Trapezoidal estimates on evenly spaced grids whose interval count doubles
/// from `initial_points - 1`; each refinement only evaluates the new midpoints.
/// Stops once `confirm_levels` successive refinements each agree with the
/// previous estimate to rel_tol (relative, with a 1e-12 floor), or when the
/// next level would exceed max_points; returns the last estimate either way.
template <typename F>
double adaptive_even_grid_integral(F&& f, double a, double b, const IntegratorConfig& cfg = {}) {
  if (!(a < b)) throw NumericError("integration bounds must satisfy a < b");
  if (!cfg.valid()) throw NumericError("invalid integrator configuration");

  auto eval = [&](double x) {
    const double v = f(x);
    if (!std::isfinite(v)) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "integrand is not finite at x = " << x;
      throw NumericError(msg.str());
    }
    return v;
  };

  std::size_t intervals = cfg.initial_points - 1;
  double h = (b - a) / static_cast<double>(intervals);
  double sum = 0.5 * (eval(a) + eval(b));
  for (std::size_t j = 1; j < intervals; ++j) sum += eval(a + static_cast<double>(j) * h);
  double estimate = sum * h;
  int stable_levels = 0;

  while (2 * intervals + 1 <= cfg.max_points) {
    const double h_new = 0.5 * h;
    for (std::size_t j = 0; j < intervals; ++j) {
      sum += eval(a + (2.0 * static_cast<double>(j) + 1.0) * h_new);
    }
    intervals *= 2;
    h = h_new;
    const double refined = sum * h;
    const bool stable = std::abs(refined - estimate) <= cfg.rel_tol * (std::abs(refined) + 1e-12);
    estimate = refined;
    stable_levels = stable ? stable_levels + 1 : 0;
    if (stable_levels == cfg.confirm_levels) break;
  }
  return estimate;
}

/// Lower empirical quantile of ascending `sorted`: the smallest value v with
/// Pr(X <= v) >= t.
inline double empirical_quantile(std::span<const double> sorted, double t) {
  if (sorted.empty()) throw NumericError("empirical_quantile of an empty sample");
  if (!(t >= 0.0 && t <= 1.0)) throw NumericError("quantile level must lie in [0, 1]");
  if (t == 0.0) return sorted.front();
  const double n = static_cast<double>(sorted.size());
  auto k = static_cast<std::size_t>(std::ceil(t * n));
  if (k < 1) k = 1;
  if (k > sorted.size()) k = sorted.size();
  return sorted[k - 1];
}

}  // namespace fairmix
