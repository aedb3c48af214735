#include <gtest/gtest.h>

#include <cmath>

#include "fairmix/metrics.hpp"
#include "fairmix/rng.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

namespace fairmix {
namespace {

using testing::curves;
using testing::groups;

TEST(Accuracy, Examples) {
  EXPECT_EQ(accuracy(std::vector<double>{0.9, 0.1}, std::vector<int>{1, 0}), 1.0);
  EXPECT_EQ(accuracy(std::vector<double>{0.9, 0.1}, std::vector<int>{0, 1}), 0.0);
  EXPECT_EQ(accuracy(std::vector<double>{0.5}, std::vector<int>{1}), 1.0);
  EXPECT_THROW(accuracy(std::vector<double>{}, std::vector<int>{}), ValidationError);
}

TEST(DpGap, Examples) {
  EXPECT_EQ(dp_gap(std::vector<double>{0.9, 0.1, 0.8, 0.2}, groups({0, 0, 1, 1})), 0.0);
  std::vector<double> p;
  std::vector<int> ids;
  for (int i = 0; i < 10; ++i) {
    p.push_back(i < 8 ? 0.9 : 0.1);
    ids.push_back(0);
  }
  for (int i = 0; i < 10; ++i) {
    p.push_back(i < 3 ? 0.9 : 0.1);
    ids.push_back(1);
  }
  EXPECT_NEAR(dp_gap(p, groups(ids)), 0.5, 1e-15);
  std::vector<double> q;
  std::vector<int> jd;
  const int pos[] = {2, 5, 9};
  for (int g = 0; g < 3; ++g) {
    for (int i = 0; i < 10; ++i) {
      q.push_back(i < pos[g] ? 1.0 : 0.0);
      jd.push_back(g);
    }
  }
  EXPECT_NEAR(dp_gap(q, groups(jd)), 0.7, 1e-15);
  EXPECT_EQ(dp_gap(q, groups(std::vector<int>(30, 0))), 0.0);
}

TEST(EoGap, Examples) {
  // group 0: TPR 1 (2/2), FPR 0.2 (1/5); group 1: TPR 0.5 (1/2), FPR 0.2 (1/5)
  const std::vector<double> p{1, 1, 1, 0, 0, 0, 0, 1, 0, 1, 0, 0, 0, 0};
  const std::vector<int> y{1, 1, 0, 0, 0, 0, 0, 1, 1, 0, 0, 0, 0, 0};
  const auto g = groups({0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1});
  EXPECT_NEAR(eo_gap(p, y, g), 0.5, 1e-15);
  EXPECT_EQ(eo_gap(p, y, groups(std::vector<int>(14, 0))), 0.0);
  const std::vector<double> perfect{1, 0, 1, 0};
  EXPECT_EQ(eo_gap(perfect, std::vector<int>{1, 0, 1, 0}, groups({0, 0, 1, 1})), 0.0);
}

TEST(EoGap, UndefinedRateNamesGroup) {
  try {
    eo_gap(std::vector<double>{1, 0, 1, 0}, std::vector<int>{1, 0, 0, 0}, groups({0, 0, 1, 1}));
    FAIL();
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("g1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("TPR"), std::string::npos) << msg;
  }
}

TEST(Mse, Examples) {
  EXPECT_EQ(mse(std::vector<double>{1, 2}, std::vector<double>{1, 2}), 0.0);
  EXPECT_EQ(mse(std::vector<double>{0, 2}, std::vector<double>{1, 1}), 1.0);
  EXPECT_EQ(mse(std::vector<double>{3}, std::vector<double>{5}), 4.0);
}

std::vector<SurvivalOutcome> uncensored(std::vector<double> t) {
  std::vector<SurvivalOutcome> y;
  for (double v : t) y.push_back({v, true});
  return y;
}

TEST(CIndex, Examples) {
  const auto y = uncensored({1, 2, 3, 4});
  EXPECT_EQ(c_index(std::vector<double>{4, 3, 2, 1}, y), 1.0);
  EXPECT_EQ(c_index(std::vector<double>{1, 2, 3, 4}, y), 0.0);
  EXPECT_THROW(c_index(std::vector<double>{1, 2}, std::vector<SurvivalOutcome>{{1, false}, {2, false}}),
               ValidationError);
}

std::vector<SurvivalOutcome> random_outcomes(Rng& rng, std::size_t n, bool ties) {
  std::vector<SurvivalOutcome> y(n);
  for (auto& o : y) {
    const double t = -std::log(1 - rng.uniform()) * 2;
    const double c = -std::log(1 - rng.uniform()) * 2;
    o.time = std::min(t, c);
    if (ties) o.time = std::ceil(o.time * 4) / 4;
    o.event = t <= c;
  }
  return y;
}

TEST(CIndex, MatchesBruteForce) {
  Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 5 + rng.index(96);
    const auto y = random_outcomes(rng, n, trial % 2 == 0);
    std::vector<double> r(n);
    for (auto& v : r) v = std::round(rng.normal() * 3);
    EXPECT_EQ(c_index(r, y), oracle::c_index_pairs(r, y));
  }
}

TEST(CIndex, RankInvariant) {
  Rng rng(42);
  const auto y = random_outcomes(rng, 40, false);
  std::vector<double> r(40), s(40);
  for (std::size_t i = 0; i < 40; ++i) {
    r[i] = rng.normal();
    s[i] = std::atan(r[i]) * 5 - 1;
  }
  EXPECT_EQ(c_index(r, y), c_index(s, y));
}

TEST(KaplanMeier, HandExamples) {
  const auto a = kaplan_meier(uncensored({1, 2, 3}));
  EXPECT_EQ(a(1), 1.0 - 1.0 / 3.0);
  EXPECT_EQ(a(2), (1.0 - 1.0 / 3.0) * (1.0 - 1.0 / 2.0));
  EXPECT_EQ(a(3), 0.0);
  EXPECT_EQ(a(0.5), 1.0);
  EXPECT_EQ(a.left_limit(1), 1.0);
  const auto none = kaplan_meier(std::vector<SurvivalOutcome>{{1, false}, {2, false}, {3, false}});
  for (double t : {0.0, 1.0, 2.5, 10.0}) EXPECT_EQ(none(t), 1.0);
  const auto b = kaplan_meier(std::vector<SurvivalOutcome>{{1, true}, {2, false}, {3, true}});
  EXPECT_EQ(b(1), 1.0 - 1.0 / 3.0);
  EXPECT_EQ(b(2), 1.0 - 1.0 / 3.0);
  EXPECT_EQ(b(3), (1.0 - 1.0 / 3.0) * (1.0 - 1.0 / 1.0));
}

TEST(Ibs, PerfectAndConstantPredictors) {
  const auto y = uncensored({1, 2, 3});
  const std::vector<double> grid{0, 0.5, 1, 1.5, 2, 2.5, 3};
  std::vector<std::vector<double>> oracle_rows, half_rows;
  for (const auto& o : y) {
    std::vector<double> r;
    for (double t : grid) r.push_back(t < o.time ? 1.0 : 0.0);
    oracle_rows.push_back(r);
    half_rows.push_back(std::vector<double>(grid.size(), 0.5));
  }
  EXPECT_EQ(ibs(curves(grid, oracle_rows), y), 0.0);
  EXPECT_NEAR(ibs(curves(grid, half_rows), y), 0.25, 1e-15);
}

TEST(Ibs, MatchesDirectSummation) {
  Rng rng(43);
  int checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 6 + rng.index(45);
    auto y = random_outcomes(rng, n, trial % 3 == 0);
    double tmax = 0;
    for (const auto& o : y) tmax = std::max(tmax, o.time);
    std::vector<double> grid;
    for (int j = 0; j <= 20; ++j) grid.push_back(0.8 * tmax * j / 20);
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < n; ++i) {
      const double rate = std::exp(rng.normal() * 0.5) / 2;
      std::vector<double> r;
      for (double t : grid) r.push_back(std::exp(-rate * t));
      rows.push_back(r);
    }
    double got = 0;
    try {
      got = ibs(curves(grid, rows), y);
    } catch (const ValidationError&) {
      continue;
    }
    EXPECT_NEAR(got, oracle::ibs_direct(rows, grid, y), 1e-10);
    ++checked;
  }
  EXPECT_GT(checked, 30);
}

TEST(Ibs, UnweightedWithoutCensoring) {
  const auto y = uncensored({0.7, 1.4, 2.2, 2.9});
  const std::vector<double> grid{0, 1, 2, 3};
  const auto c = curves(grid, {{1, 0.4, 0.2, 0.1}, {1, 0.9, 0.3, 0.3}, {1, 0.5, 0.5, 0.2}, {1, 0.8, 0.7, 0.1}});
  std::vector<double> bs;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    double s = 0;
    for (std::size_t i = 0; i < 4; ++i) {
      const double ind = y[i].time > grid[j] ? 1.0 : 0.0;
      s += (ind - c(i, j)) * (ind - c(i, j));
    }
    bs.push_back(s / 4);
  }
  EXPECT_NEAR(ibs(c, y), trapezoid(grid, bs) / 3, 1e-15);
}

TEST(Ibs, CensoringExhaustedBeforeTau) {
  const std::vector<SurvivalOutcome> y{{1, true}, {2, false}};
  const auto c = curves({0, 2, 3}, {{1, 0.5, 0.4}, {1, 0.5, 0.4}});
  try {
    ibs(c, y);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("t = 2"), std::string::npos) << e.what();
  }
}

TEST(Evaluate, ReportShapes) {
  Dataset ds;
  ds.features = testing::matrix({{0}, {1}, {2}, {3}});
  ds.groups = groups({0, 0, 0, 0});
  ds.labels = std::vector<int>{1, 0, 1, 0};
  const ScorePredictions perfect{{1, 0, 1, 0}, ScoreKind::probability};
  const auto rep = evaluate(TaskKind::binary_classification, ds, perfect);
  ASSERT_EQ(rep.values.size(), 3u);
  EXPECT_EQ(rep.values[0].first, "accuracy");
  EXPECT_EQ(rep.at("accuracy"), 1.0);
  EXPECT_EQ(rep.at("dp_gap"), 0.0);
  EXPECT_EQ(rep.at("eo_gap"), 0.0);

  ds.labels = std::vector<double>{1, 2, 3, 4};
  const auto reg = evaluate(TaskKind::regression, ds, ScorePredictions{{1, 2, 3, 4}, ScoreKind::regression});
  EXPECT_EQ(reg.at("mse"), 0.0);
  EXPECT_TRUE(reg.contains("sp_auc"));

  ds.labels = uncensored({1, 2, 3, 4});
  const auto surv = evaluate(TaskKind::survival, ds,
                             curves({0, 2, 4}, {{1, 0.5, 0}, {1, 0.6, 0.1}, {1, 0.7, 0.2}, {1, 0.9, 0.3}}));
  EXPECT_EQ(surv.at("gf_max"), 0.0);
  EXPECT_EQ(surv.at("gf_avg"), 0.0);
  EXPECT_TRUE(surv.contains("c_index"));
  EXPECT_TRUE(surv.contains("ibs"));
}

}  // namespace
}  // namespace fairmix
