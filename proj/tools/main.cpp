// SPDX-License-Identifier: Apache-2.0
//
// topp: select-then-prune top-p sparse attention experiments.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace topp::cli;

  CLI::App app{"Adaptive top-p sparse attention: pipeline runs, oracle checks and sweeps"};
  app.require_subcommand(1);

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Run a workload through the pipeline");
  run_cmd->add_option("--config", run.config, "Experiment config (JSON)")->required();
  run_cmd->add_option("--out", run.out, "Per-head CSV; a .summary.json is written alongside")
      ->required();
  run_cmd->add_option("--seed", run.seed, "Override workload.seed");

  OracleCheckOptions check;
  auto* check_cmd = app.add_subcommand("oracle-check", "Compare the pruner with the sort oracle");
  check_cmd->add_option("--trials", check.trials, "Random weight vectors to test")
      ->capture_default_str();
  check_cmd->add_option("--seed", check.seed, "Base seed")->capture_default_str();
  check_cmd->add_option("--p-grid", check.p_grid, "Thresholds to test")->delimiter(',');
  check_cmd->add_option("--epsilon", check.epsilon, "Override the pruner's bracket resolution");
  check_cmd->add_option("--max-iters", check.max_iters, "Iteration cap")->capture_default_str();

  SweepOptions sweep;
  auto* sweep_cmd = app.add_subcommand("sweep-p", "Sweep the top-p threshold");
  sweep_cmd->add_option("--config", sweep.config, "Experiment config (JSON)")->required();
  sweep_cmd->add_option("--out", sweep.out, "Output CSV")->required();
  sweep_cmd->add_option("--p-grid", sweep.p_grid, "Ascending thresholds")->delimiter(',');
  sweep_cmd->add_option("--seed", sweep.seed, "Override workload.seed");

  QuantBenchOptions quant;
  auto* quant_cmd = app.add_subcommand("quant-bench", "Compare estimator precisions");
  quant_cmd->add_option("--config", quant.config, "Experiment config (JSON)")->required();
  quant_cmd->add_option("--out", quant.out, "Output CSV")->required();
  quant_cmd->add_option("--bits", quant.bits, "Estimator widths: 2,4,8,exact")->delimiter(',');
  quant_cmd->add_option("--trials", quant.trials, "Query steps to generate");
  quant_cmd->add_option("--seed", quant.seed, "Override workload.seed");

  BudgetCurveOptions curve;
  auto* curve_cmd = app.add_subcommand("budget-curve", "Top-p budget against threshold");
  curve_cmd->add_option("--config", curve.config, "Experiment config (JSON)");
  curve_cmd->add_option("--weights", curve.weights, "Tensor file of weight rows");
  curve_cmd->add_option("--out", curve.out, "Output CSV")->required();
  curve_cmd->add_option("--p-grid", curve.p_grid, "Ascending thresholds")
      ->delimiter(',')
      ->required();
  curve_cmd->add_option("--seed", curve.seed, "Override workload.seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kConfigError;
  }

  if (*run_cmd) return cmd_run(run, std::cerr);
  if (*check_cmd) return cmd_oracle_check(check, std::cerr);
  if (*sweep_cmd) return cmd_sweep_p(sweep, std::cerr);
  if (*quant_cmd) return cmd_quant_bench(quant, std::cerr);
  if (*curve_cmd) return cmd_budget_curve(curve, std::cerr);
  return kConfigError;
}
