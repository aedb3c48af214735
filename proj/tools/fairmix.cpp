// fairmix: fairness post-processing by gated mixtures of a pretrained model
// and a simple expert.

#include <CLI11.hpp>

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "fairmix.hpp"

namespace {

using namespace fairmix;

const char* kSweepHelp =
    "Sweep TSV columns, tab separated, one row per (variant, lambda), ordered by variant then lambda\n"
    "in configuration order:\n"
    "  classification: variant lambda objective accuracy dp_gap eo_gap iterations converged\n"
    "  regression:     variant lambda objective mse sp_auc iterations converged\n"
    "  survival:       variant lambda objective c_index ibs gf_max gf_avg iterations converged\n"
    "Metrics are measured on the held-out test split. A failed fit leaves nan metrics and\n"
    "converged=false.";

struct Overrides {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string variant;
  std::optional<double> lambda;
  std::string lambda_list;
  std::string task;
  std::optional<int> threads;
};

std::vector<double> parse_lambda_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto v = parse_double(item);
    if (!v || !(*v >= 0.0) || !std::isfinite(*v)) throw ValidationError("bad --lambda-list entry '" + item + "'");
    out.push_back(*v);
  }
  if (out.empty()) throw ValidationError("--lambda-list is empty");
  return out;
}

RunConfig load_config(const Overrides& o) {
  RunConfig cfg = read_run_config(o.config);
  if (!o.task.empty()) cfg.task = parse_task(o.task);
  if (!o.variant.empty()) {
    cfg.variants.clear();
    std::stringstream ss(o.variant);
    std::string item;
    while (std::getline(ss, item, ',')) cfg.variants.push_back(parse_variant(item));
  }
  if (o.lambda && !o.lambda_list.empty()) throw ValidationError("give either --lambda or --lambda-list");
  if (o.lambda) {
    if (!(*o.lambda >= 0.0)) throw ValidationError("--lambda must be >= 0");
    cfg.lambdas = {*o.lambda};
  }
  if (!o.lambda_list.empty()) cfg.lambdas = parse_lambda_list(o.lambda_list);
  if (o.seed) cfg.seed = *o.seed;
  if (o.threads) {
    if (*o.threads < 1) throw ValidationError("--threads must be >= 1");
    cfg.threads = *o.threads;
  }
  for (auto v : cfg.variants) cfg.spec(v, cfg.lambdas.front());
  return cfg;
}

void add_common(CLI::App* sub, Overrides& o, bool sweep) {
  sub->add_option("--config", o.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", o.out, sweep ? "Output TSV" : "Output model file (JSON)")->required();
  sub->add_option("--seed", o.seed, "Seed for the split and optimizer restarts");
  sub->add_option("--variant", o.variant,
                  "one_pretrained_mixture | one_pretrained_moe | two_pretrained_mixture | two_pretrained_moe | "
                  "frappe (comma separated for sweep)");
  sub->add_option("--lambda", o.lambda, "Fairness weight");
  sub->add_option("--task", o.task, "classification | regression | survival");
  if (sweep) {
    sub->add_option("--lambda-list", o.lambda_list, "Comma separated fairness weights");
    sub->add_option("--threads", o.threads, "Concurrent fits");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fairness post-processing with gated mixtures of a pretrained model and a simple expert"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "fairmix 1.0.0");

  Overrides fit_o, sweep_o;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a combiner and write the model file");
  add_common(fit_cmd, fit_o, false);

  auto* sweep_cmd = app.add_subcommand("sweep", "Fit every (variant, lambda) and write a TSV of test metrics");
  add_common(sweep_cmd, sweep_o, true);
  sweep_cmd->footer(kSweepHelp);

  PredictInputs pred;
  auto* predict_cmd = app.add_subcommand("predict", "Combined predictions of a fitted model");
  predict_cmd->add_option("--model", pred.model, "Model file")->required();
  predict_cmd->add_option("--features", pred.features, "Features CSV")->required();
  predict_cmd->add_option("--perf", pred.perf, "Perf predictions (pred column or curve file)")->required();
  predict_cmd->add_option("--fair", pred.fair, "Fair-model predictions (two-pretrained variants)");
  predict_cmd->add_option("--groups", pred.groups, "Ignored: predictions never use sensitive attributes");
  predict_cmd->add_option("--out", pred.out, "Output predictions file")->required();

  EvaluateInputs ev;
  std::string ev_task = "classification", ev_mode = "intersectional";
  auto* eval_cmd = app.add_subcommand("evaluate", "Metric report (JSON on stdout)");
  eval_cmd->add_option("--predictions", ev.predictions, "Predictions file")->required();
  eval_cmd->add_option("--labels", ev.labels, "Labels CSV")->required();
  eval_cmd->add_option("--groups", ev.groups, "Groups CSV")->required();
  eval_cmd->add_option("--task", ev_task, "classification | regression | survival")->required();
  eval_cmd->add_option("--group-mode", ev_mode, "intersectional | per_attribute");

  SyntheticOptions syn;
  std::string syn_task = "classification", syn_out;
  auto* gen_cmd = app.add_subcommand("gen-synthetic", "Write a synthetic biased dataset and a run configuration");
  gen_cmd->add_option("--task", syn_task, "classification | regression | survival");
  gen_cmd->add_option("--n", syn.n, "Rows (>= 20)");
  gen_cmd->add_option("--bias", syn.bias_strength, "Bias strength of the base model (>= 0)");
  gen_cmd->add_option("--seed", syn.seed, "Seed");
  gen_cmd->add_option("--censoring", syn.censoring_fraction, "Censoring fraction (survival)");
  gen_cmd->add_option("--out", syn_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (fit_cmd->parsed()) {
      cmd_fit(load_config(fit_o), fit_o.out, std::cerr);
    } else if (sweep_cmd->parsed()) {
      cmd_sweep(load_config(sweep_o), sweep_o.out, std::cerr);
    } else if (predict_cmd->parsed()) {
      cmd_predict(pred, std::cerr);
    } else if (eval_cmd->parsed()) {
      ev.task = parse_task(ev_task);
      ev.group_mode = parse_group_mode(ev_mode);
      cmd_evaluate(ev, std::cout);
    } else if (gen_cmd->parsed()) {
      syn.task = parse_task(syn_task);
      cmd_gen_synthetic(syn, syn_out);
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
