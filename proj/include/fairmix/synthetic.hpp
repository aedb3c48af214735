#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fairmix/core_data.hpp"
#include "fairmix/error.hpp"
#include "fairmix/numerics.hpp"
#include "fairmix/rng.hpp"

namespace fairmix {

/// Synthetic two-group data with a deliberately biased base model.
///
/// Features x1..x3 are standard normal; x4 is a noisy proxy of the group.
/// Labels depend on x1..x3 and only weakly on the group, while the base
/// model's predictions carry a group shift proportional to `bias_strength`.
struct SyntheticOptions {
  TaskKind task = TaskKind::binary_classification;
  std::size_t n = 2000;
  double bias_strength = 1.0;
  std::uint64_t seed = 0;
  // Survival only.
  double censoring_fraction = 0.48;
  std::size_t grid_points = 50;
};

struct SyntheticData {
  Dataset dataset;
  std::vector<std::string> group_values;  // raw sensitive column, "0" or "1"
};

namespace detail {

// Censoring rate c such that the share of rows with e_i / c < t_i is as close
// as possible to `target`.
inline double solve_censoring_rate(const std::vector<double>& t, const std::vector<double>& e, double target) {
  auto share = [&](double c) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < t.size(); ++i) k += e[i] / c < t[i] ? 1 : 0;
    return static_cast<double>(k) / static_cast<double>(t.size());
  };
  double lo = 1e-8, hi = 1e8;
  for (int it = 0; it < 200; ++it) {
    const double mid = std::sqrt(lo * hi);
    if (share(mid) < target) lo = mid;
    else hi = mid;
  }
  return std::abs(share(lo) - target) <= std::abs(share(hi) - target) ? lo : hi;
}

}  // namespace detail

inline SyntheticData generate_synthetic(const SyntheticOptions& opt) {
  if (opt.n < 20) throw ValidationError("synthetic data needs n >= 20");
  if (!(opt.bias_strength >= 0.0)) throw ValidationError("bias strength must be >= 0");
  if (opt.task == TaskKind::survival && !(opt.censoring_fraction >= 0.0 && opt.censoring_fraction < 1.0)) {
    throw ValidationError("censoring fraction must be in [0, 1)");
  }
  Rng rng(opt.seed);
  const std::size_t n = opt.n;
  const double b = opt.bias_strength;

  SyntheticData out;
  Dataset& ds = out.dataset;
  ds.features.rows = n;
  ds.features.column_names = {"x1", "x2", "x3", "x4"};
  ds.features.values.resize(n * 4);
  std::vector<int> g(n);
  std::vector<double> signal(n);
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = rng.bernoulli(0.5) ? 1 : 0;
    const double x1 = rng.normal(), x2 = rng.normal(), x3 = rng.normal();
    const double s = 2.0 * g[i] - 1.0;
    const double x4 = 0.75 * s + 0.6 * rng.normal();
    double* row = ds.features.values.data() + i * 4;
    row[0] = x1;
    row[1] = x2;
    row[2] = x3;
    row[3] = x4;
    signal[i] = 1.2 * x1 - 0.8 * x2 + 0.5 * x3;
  }
  // Both groups must be present for the generated data to be usable.
  if (std::all_of(g.begin(), g.end(), [&](int v) { return v == g[0]; })) g[0] = 1 - g[0];
  for (int v : g) out.group_values.push_back(std::to_string(v));
  ds.groups = make_groups({out.group_values});

  switch (opt.task) {
    case TaskKind::binary_classification: {
      std::vector<int> y(n);
      ScorePredictions perf{std::vector<double>(n), ScoreKind::probability};
      for (std::size_t i = 0; i < n; ++i) {
        const double s = 2.0 * g[i] - 1.0;
        y[i] = rng.bernoulli(sigmoid(signal[i] + 0.25 * b * s)) ? 1 : 0;
        perf.values[i] = sigmoid(signal[i] + 1.0 * b * s);
      }
      ds.labels = std::move(y);
      ds.perf = std::move(perf);
      break;
    }
    case TaskKind::regression: {
      std::vector<double> y(n);
      ScorePredictions perf{std::vector<double>(n), ScoreKind::regression};
      for (std::size_t i = 0; i < n; ++i) {
        const double s = 2.0 * g[i] - 1.0;
        const double x1 = ds.features(i, 0);
        y[i] = signal[i] + 0.1 * b * s + 0.3 * rng.normal();
        perf.values[i] = signal[i] + 0.2 * std::sin(2.0 * x1) + 0.8 * b * s + 0.1 * rng.normal();
      }
      ds.labels = std::move(y);
      ds.perf = std::move(perf);
      break;
    }
    case TaskKind::survival: {
      constexpr double base_rate = 0.1;
      constexpr double shape = 1.3;
      std::vector<double> t(n), e(n), lp(n);
      for (std::size_t i = 0; i < n; ++i) {
        lp[i] = 0.5 * signal[i];
        double u = rng.uniform();
        while (u <= 0.0) u = rng.uniform();
        t[i] = -std::log(u) / (base_rate * std::exp(lp[i]));
        double v = rng.uniform();
        while (v <= 0.0) v = rng.uniform();
        e[i] = -std::log(v);
      }
      std::vector<SurvivalOutcome> y(n);
      if (opt.censoring_fraction == 0.0) {
        for (std::size_t i = 0; i < n; ++i) y[i] = {t[i], true};
      } else {
        const double c = detail::solve_censoring_rate(t, e, opt.censoring_fraction);
        for (std::size_t i = 0; i < n; ++i) {
          const double cens = e[i] / c;
          y[i] = cens < t[i] ? SurvivalOutcome{cens, false} : SurvivalOutcome{t[i], true};
        }
      }
      std::vector<double> observed(n);
      for (std::size_t i = 0; i < n; ++i) observed[i] = y[i].time;
      std::sort(observed.begin(), observed.end());
      const double tau = empirical_quantile(observed, 0.8);
      SurvivalCurves perf{even_grid(tau, opt.grid_points), n, std::vector<double>(n * opt.grid_points)};
      // Weibull-shaped base model with a group shift in its linear predictor.
      const double scale = std::pow(base_rate, 1.0 / shape);
      for (std::size_t i = 0; i < n; ++i) {
        const double s = 2.0 * g[i] - 1.0;
        const double risk = std::exp(lp[i] + 0.8 * b * s);
        auto row = perf.row(i);
        for (std::size_t j = 0; j < perf.cols(); ++j) {
          row[j] = std::exp(-std::pow(scale * perf.grid.times[j], shape) * risk);
        }
        row[0] = 1.0;
      }
      ds.labels = std::move(y);
      ds.perf = std::move(perf);
      break;
    }
  }
  return out;
}

}  // namespace fairmix
