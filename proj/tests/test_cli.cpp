#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <string>

#include "fairmix/commands.hpp"
#include "fairmix/io.hpp"

namespace fairmix {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code = -1;
  std::string output;  // stdout and stderr together
};

Run cli(const std::string& args) {
  const std::string cmd = std::string("\"") + FAIRMIX_CLI_PATH + "\" " + args + " 2>&1";
  Run r;
  FILE* p = ::popen(cmd.c_str(), "r");
  if (p == nullptr) return r;
  char buf[4096];
  std::size_t got;
  while ((got = std::fread(buf, 1, sizeof buf, p)) > 0) r.output.append(buf, got);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("fairmix_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path gen(const std::string& task, int n = 120, double bias = 1.0, int seed = 1, const std::string& sub = "data") {
    const auto d = dir_ / sub;
    const auto r = cli("gen-synthetic --task " + task + " --n " + std::to_string(n) + " --bias " + format_double(bias) +
                       " --seed " + std::to_string(seed) + " --out " + q(d));
    EXPECT_EQ(r.code, 0) << r.output;
    return d;
  }

  std::string config(const fs::path& d) { return "--config " + q(d / "config.json"); }

  fs::path dir_;
};

TEST_F(Cli, HelpAndVersion) {
  EXPECT_EQ(cli("--help").code, 0);
  const auto v = cli("--version");
  EXPECT_EQ(v.code, 0);
  EXPECT_NE(v.output.find("fairmix"), std::string::npos);
  const auto h = cli("sweep --help");
  EXPECT_NE(h.output.find("dp_gap"), std::string::npos);
  EXPECT_NE(h.output.find("sp_auc"), std::string::npos);
}

TEST_F(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(cli("").code, 1);
  EXPECT_EQ(cli("frobnicate").code, 1);
  EXPECT_EQ(cli("fit --out x.json").code, 1);
}

TEST_F(Cli, MissingPerfFileIsIoError) {
  const auto d = gen("classification");
  fs::remove(d / "perf.csv");
  const auto r = cli("fit " + config(d) + " --variant one_pretrained_moe --lambda 1 --out " + q(dir_ / "m.json"));
  EXPECT_EQ(r.code, 2) << r.output;
  EXPECT_NE(r.output.find((d / "perf.csv").string()), std::string::npos) << r.output;
}

TEST_F(Cli, ValidationFailuresExitOne) {
  const auto d = gen("classification");
  EXPECT_EQ(cli("fit " + config(d) + " --variant nonsense --out " + q(dir_ / "m.json")).code, 1);
  EXPECT_EQ(cli("fit " + config(d) + " --lambda -1 --out " + q(dir_ / "m.json")).code, 1);
  // classification perf outside [0, 1]
  std::string bad = "pred\n1.5\n";
  for (int i = 1; i < 120; ++i) bad += "0.5\n";
  write_text((d / "perf.csv").string(), bad);
  const auto r = cli("fit " + config(d) + " --variant one_pretrained_moe --lambda 1 --out " + q(dir_ / "m.json"));
  EXPECT_EQ(r.code, 1) << r.output;
}

TEST_F(Cli, FitAndSweepAreByteDeterministic) {
  const auto d = gen("regression");
  for (int k = 0; k < 2; ++k) {
    const auto s = std::to_string(k);
    ASSERT_EQ(cli("fit " + config(d) + " --variant two_pretrained_moe --lambda 2 --seed 5 --out " +
                  q(dir_ / ("m" + s + ".json")))
                  .code,
              0);
    ASSERT_EQ(cli("sweep " + config(d) + " --lambda-list 0.01,1 --seed 5 --threads " + std::to_string(k + 1) +
                  " --out " + q(dir_ / ("s" + s + ".tsv")))
                  .code,
              0);
  }
  EXPECT_EQ(read_text((dir_ / "m0.json").string()), read_text((dir_ / "m1.json").string()));
  EXPECT_EQ(read_text((dir_ / "s0.tsv").string()), read_text((dir_ / "s1.tsv").string()));
}

TEST_F(Cli, SweepRowCountAndColumns) {
  const auto d = gen("classification");
  ASSERT_EQ(cli("sweep " + config(d) + " --variant one_pretrained_moe,frappe --lambda-list 0,1,10 --out " +
                q(dir_ / "s.tsv"))
                .code,
            0);
  const auto t = read_text((dir_ / "s.tsv").string());
  std::vector<std::string> lines;
  std::stringstream ss(t);
  for (std::string l; std::getline(ss, l);) lines.push_back(l);
  ASSERT_EQ(lines.size(), 1u + 2 * 3);
  EXPECT_EQ(lines[0], "variant\tlambda\tobjective\taccuracy\tdp_gap\teo_gap\titerations\tconverged");
  EXPECT_EQ(lines[1].substr(0, 21), "one_pretrained_moe\t0\t");
  EXPECT_EQ(lines[6].substr(0, 10), "frappe\t10\t");
}

TEST_F(Cli, SweepFairnessColumnFallsWithLambda) {
  const auto d = gen("classification", 400, 1.0, 2);
  ASSERT_EQ(cli("sweep " + config(d) + " --variant one_pretrained_moe --lambda-list 0.01,1,100 --out " +
                q(dir_ / "s.tsv"))
                .code,
            0);
  std::stringstream ss(read_text((dir_ / "s.tsv").string()));
  std::string line;
  std::getline(ss, line);
  std::vector<double> dp;
  while (std::getline(ss, line)) {
    std::stringstream ls(line);
    std::string cell;
    for (int k = 0; k < 5; ++k) std::getline(ls, cell, '\t');
    dp.push_back(*parse_double(cell));
  }
  ASSERT_EQ(dp.size(), 3u);
  EXPECT_LT(dp[1], dp[0]);
  EXPECT_LE(dp[2], dp[1] * 1.05 + 1e-9);
}

TEST_F(Cli, SingleLambdaSweepMatchesFitThenEvaluate) {
  const auto d = gen("regression", 150);
  ASSERT_EQ(cli("sweep " + config(d) + " --variant one_pretrained_mixture --lambda 1 --out " + q(dir_ / "s.tsv")).code,
            0);
  const auto rc = read_run_config((d / "config.json").string());
  const auto ds = load_dataset(rc, true);
  auto [train, test] = split_train_test(ds, rc.test_fraction, rc.seed);
  const auto m = fit_model(rc, VariantKind::one_pretrained_mixture, 1.0, train);
  const auto comb = combined_predictions(rc.task, m.spec.variant, m.params, test.features, test.perf, test.fair);
  const auto rep = evaluate(rc.task, test, comb);
  const auto tsv = read_text((dir_ / "s.tsv").string());
  const auto row = tsv.substr(tsv.find('\n') + 1);
  EXPECT_EQ(row, "one_pretrained_mixture\t1\t" + format_double(m.objective_value) + "\t" +
                     format_double(rep.at("mse")) + "\t" + format_double(rep.at("sp_auc")) + "\t" +
                     std::to_string(m.iterations) + "\t" + (m.converged ? "true" : "false") + "\n");
}

TEST_F(Cli, PredictWithAlphaOneReproducesPerfBitwise) {
  const auto d = gen("regression");
  ModelFile m;
  m.spec = default_spec(TaskKind::regression, VariantKind::one_pretrained_mixture, 0.0);
  m.feature_columns = {"x1", "x2", "x3", "x4"};
  m.params = initial_params(VariantKind::one_pretrained_mixture, m.feature_columns, m.feature_columns);
  m.params.gate = GateParams::constant(1.0);
  write_model((dir_ / "m.json").string(), m);
  const auto r = cli("predict --model " + q(dir_ / "m.json") + " --features " + q(d / "features.csv") + " --perf " +
                     q(d / "perf.csv") + " --out " + q(dir_ / "p.csv"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(read_text((dir_ / "p.csv").string()), read_text((d / "perf.csv").string()));
}

TEST_F(Cli, PredictIgnoresGroupColumns) {
  const auto d = gen("classification");
  ASSERT_EQ(cli("fit " + config(d) + " --variant one_pretrained_moe --lambda 1 --out " + q(dir_ / "m.json")).code, 0);
  // Same features with the sensitive column appended.
  const auto X = read_features((d / "features.csv").string());
  const auto g = read_csv((d / "groups.csv").string());
  std::string with = "x1,x2,x3,x4,group\n";
  for (std::size_t i = 0; i < X.rows; ++i) {
    for (std::size_t k = 0; k < 4; ++k) with += format_double(X(i, k)) + ",";
    with += g.rows[i][0] + "\n";
  }
  write_text((dir_ / "with_group.csv").string(), with);
  const auto plain = cli("predict --model " + q(dir_ / "m.json") + " --features " + q(d / "features.csv") + " --perf " +
                         q(d / "perf.csv") + " --out " + q(dir_ / "a.csv"));
  const auto extra = cli("predict --model " + q(dir_ / "m.json") + " --features " + q(dir_ / "with_group.csv") +
                         " --perf " + q(d / "perf.csv") + " --groups " + q(d / "groups.csv") + " --out " +
                         q(dir_ / "b.csv"));
  ASSERT_EQ(plain.code, 0) << plain.output;
  ASSERT_EQ(extra.code, 0) << extra.output;
  EXPECT_NE(extra.output.find("ignoring"), std::string::npos);
  EXPECT_EQ(read_text((dir_ / "a.csv").string()), read_text((dir_ / "b.csv").string()));
}

TEST_F(Cli, PredictRejectsMissingColumn) {
  const auto d = gen("classification");
  ASSERT_EQ(cli("fit " + config(d) + " --variant one_pretrained_moe --lambda 1 --out " + q(dir_ / "m.json")).code, 0);
  write_text((dir_ / "f.csv").string(), "x1,x2\n1,2\n");
  write_text((dir_ / "p.csv").string(), "pred\n0.5\n");
  const auto r = cli("predict --model " + q(dir_ / "m.json") + " --features " + q(dir_ / "f.csv") + " --perf " +
                     q(dir_ / "p.csv") + " --out " + q(dir_ / "o.csv"));
  EXPECT_EQ(r.code, 1) << r.output;
}

TEST_F(Cli, SurvivalPredictWritesValidCurves) {
  const auto d = gen("survival", 150);
  ASSERT_EQ(cli("fit " + config(d) + " --variant two_pretrained_moe --lambda 1 --out " + q(dir_ / "m.json")).code, 0);
  const auto r = cli("predict --model " + q(dir_ / "m.json") + " --features " + q(d / "features.csv") + " --perf " +
                     q(d / "perf.csv") + " --out " + q(dir_ / "c.csv"));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto c = read_curves((dir_ / "c.csv").string());
  std::vector<std::string> problems;
  check_curves(c, "predicted", problems);
  EXPECT_TRUE(problems.empty()) << (problems.empty() ? "" : problems.front());
  EXPECT_EQ(format_curves(c), read_text((dir_ / "c.csv").string()));
}

TEST_F(Cli, EvaluateTrivialCases) {
  write_text((dir_ / "p.csv").string(), "pred\n0.9\n0.1\n0.8\n");
  write_text((dir_ / "y.csv").string(), "label\n1\n0\n1\n");
  write_text((dir_ / "g.csv").string(), "group\na\na\na\n");
  auto r = cli("evaluate --task classification --predictions " + q(dir_ / "p.csv") + " --labels " + q(dir_ / "y.csv") +
               " --groups " + q(dir_ / "g.csv"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(r.output, "{\n  \"accuracy\": 1.0,\n  \"dp_gap\": 0.0,\n  \"eo_gap\": 0.0\n}\n");

  write_text((dir_ / "y2.csv").string(), "target\n0.9\n0.1\n0.8\n");
  r = cli("evaluate --task regression --predictions " + q(dir_ / "p.csv") + " --labels " + q(dir_ / "y2.csv") +
          " --groups " + q(dir_ / "g.csv"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("\"mse\": 0.0"), std::string::npos) << r.output;

  write_text((dir_ / "c.csv").string(), "id,t=0,t=1,t=2\n0,1,0.5,0.2\n1,1,0.8,0.1\n2,1,0.9,0.6\n");
  write_text((dir_ / "y3.csv").string(), "time,event\n0.5,1\n1.5,1\n1.8,0\n");
  r = cli("evaluate --task survival --predictions " + q(dir_ / "c.csv") + " --labels " + q(dir_ / "y3.csv") +
          " --groups " + q(dir_ / "g.csv"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("\"gf_max\": 0.0"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("\"gf_avg\": 0.0"), std::string::npos) << r.output;

  write_text((dir_ / "short.csv").string(), "label\n1\n0\n");
  r = cli("evaluate --task classification --predictions " + q(dir_ / "p.csv") + " --labels " + q(dir_ / "short.csv") +
          " --groups " + q(dir_ / "g.csv"));
  EXPECT_EQ(r.code, 1) << r.output;
}

TEST_F(Cli, GenSyntheticBiasAndDeterminism) {
  const auto a = gen("classification", 2000, 0.0, 3, "a");
  const auto b = gen("classification", 2000, 1.0, 3, "b");
  const auto c = gen("classification", 2000, 1.0, 3, "c");
  auto gap = [](const fs::path& d) {
    const auto p = read_scores((d / "perf.csv").string(), ScoreKind::probability);
    return dp_gap(p.values, read_groups((d / "groups.csv").string()));
  };
  EXPECT_LE(gap(a), 0.05);
  EXPECT_GE(gap(b), 0.2);
  for (const auto* f : {"features.csv", "labels.csv", "groups.csv", "perf.csv"}) {
    EXPECT_EQ(read_text((b / f).string()), read_text((c / f).string())) << f;
  }
  EXPECT_EQ(cli("gen-synthetic --n 5 --out " + q(dir_ / "tiny")).code, 1);
}

}  // namespace
}  // namespace fairmix
