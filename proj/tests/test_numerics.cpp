#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fairmix/numerics.hpp"
#include "fairmix/rng.hpp"

namespace fairmix {
namespace {

TEST(AdaptiveIntegral, LinearIsExact) {
  EXPECT_DOUBLE_EQ(adaptive_even_grid_integral([](double x) { return x; }, 0.0, 1.0), 0.5);
}

TEST(AdaptiveIntegral, SineOverHalfPeriod) {
  const IntegratorConfig cfg;
  const double v = adaptive_even_grid_integral([](double x) { return std::sin(x); }, 0.0, std::numbers::pi, cfg);
  EXPECT_NEAR(v, 2.0, 2.0 * cfg.rel_tol);
}

TEST(AdaptiveIntegral, ConstantStopsAfterFirstRefinement) {
  int calls = 0;
  const IntegratorConfig cfg{5, 4097, 1e-4, 1};
  const double v = adaptive_even_grid_integral(
      [&](double) {
        ++calls;
        return 1.0;
      },
      2.0, 5.0, cfg);
  EXPECT_DOUBLE_EQ(v, 3.0);
  EXPECT_EQ(calls, 9);  // 5 initial points + 4 midpoints
}

TEST(AdaptiveIntegral, DefaultConfirmsOverThreeRefinements) {
  int calls = 0;
  IntegratorConfig cfg;
  cfg.initial_points = 5;
  const double v = adaptive_even_grid_integral(
      [&](double) {
        ++calls;
        return 1.0;
      },
      2.0, 5.0, cfg);
  EXPECT_DOUBLE_EQ(v, 3.0);
  EXPECT_EQ(calls, 5 + 4 + 8 + 16);
}

TEST(AdaptiveIntegral, NonFiniteIntegrandNamesAbscissa) {
  try {
    adaptive_even_grid_integral([](double x) { return x > 0.4 && x < 0.41 ? std::nan("") : 0.0; }, 0.0, 1.0);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("x = 0.4"), std::string::npos) << e.what();
  }
}

TEST(AdaptiveIntegral, RejectsBadInputs) {
  EXPECT_THROW(adaptive_even_grid_integral([](double) { return 1.0; }, 1.0, 1.0), NumericError);
  EXPECT_THROW(adaptive_even_grid_integral([](double) { return 1.0; }, 0.0, 1.0, {1, 10, 1e-4, 1}), NumericError);
}

TEST(AdaptiveIntegral, AffineFunctionsExactAtEveryLevel) {
  Rng rng(3);
  for (int k = 0; k < 50; ++k) {
    const double a = rng.uniform(-5, 5), b = rng.uniform(-5, 5);
    const double lo = rng.uniform(-3, 0), hi = lo + rng.uniform(0.1, 4);
    const double exact = a * (hi * hi - lo * lo) / 2 + b * (hi - lo);
    for (std::size_t pts : {2u, 3u, 65u}) {
      const double v = adaptive_even_grid_integral([&](double x) { return a * x + b; }, lo, hi, {pts, pts, 1e-4, 1});
      EXPECT_NEAR(v, exact, 1e-12 * (1 + std::abs(exact)));
    }
  }
}

TEST(EmpiricalQuantile, Examples) {
  const std::vector<double> v{1, 2, 3, 4};
  EXPECT_EQ(empirical_quantile(v, 0.5), 2);
  EXPECT_EQ(empirical_quantile(v, 1.0), 4);
  EXPECT_EQ(empirical_quantile(v, 0.0), 1);
  const std::vector<double> one{7};
  for (double t : {0.0, 0.3, 1.0}) EXPECT_EQ(empirical_quantile(one, t), 7);
  EXPECT_THROW(empirical_quantile(v, 1.5), NumericError);
  EXPECT_THROW(empirical_quantile(v, -0.1), NumericError);
}

TEST(EmpiricalQuantile, MonotoneInLevel) {
  Rng rng(5);
  std::vector<double> v(37);
  for (auto& x : v) x = rng.normal();
  std::sort(v.begin(), v.end());
  double prev = -1e300;
  for (int k = 0; k <= 1000; ++k) {
    const double q = empirical_quantile(v, k / 1000.0);
    EXPECT_GE(q, prev);
    prev = q;
  }
}

TEST(Sigmoid, Values) {
  EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
  EXPECT_NEAR(sigmoid(std::log(3.0)), 0.75, 1e-15);
  const double tiny = sigmoid(-1000.0);
  EXPECT_TRUE(std::isfinite(tiny));
  EXPECT_GE(tiny, 0.0);
  EXPECT_TRUE(std::isfinite(sigmoid(1000.0)));
}

TEST(Sigmoid, Symmetry) {
  for (double z = -30; z <= 30; z += 0.37) EXPECT_NEAR(sigmoid(z) + sigmoid(-z), 1.0, 1e-12);
}

}  // namespace
}  // namespace fairmix
