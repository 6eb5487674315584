// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace topp::cli {

enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,
  kConfigError = 2,
  kIoError = 3,
  kNumericalError = 4,
};

/// Column order of the per-head CSV written by `run`.
[[nodiscard]] const std::vector<std::string>& run_csv_columns();
[[nodiscard]] const std::vector<std::string>& sweep_csv_columns();
[[nodiscard]] const std::vector<std::string>& quant_bench_csv_columns();
[[nodiscard]] const std::vector<std::string>& budget_curve_csv_columns();

/// 9 significant digits, round-trip stable for 32-bit values.
[[nodiscard]] std::string format_real(double value);

/// Path of the JSON summary written next to a CSV: results.csv -> results.summary.json.
[[nodiscard]] std::filesystem::path summary_path(const std::filesystem::path& csv);

inline const std::vector<double> kDefaultCheckGrid{0.5, 0.8, 0.85, 0.9, 0.95, 0.99};

struct RunOptions {
  std::filesystem::path config;
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
};

/// One CSV row per (prompt, step, layer, head) plus a JSON summary with
/// budget dynamism statistics.
int cmd_run(const RunOptions& options, std::ostream& log);

struct OracleCheckOptions {
  std::size_t trials = 10000;
  std::uint64_t seed = 0;
  std::vector<double> p_grid = kDefaultCheckGrid;
  /// Overrides the pruner's epsilon (used to demonstrate that faults are caught).
  std::optional<double> epsilon;
  int max_iters = 64;
};

/// Pruner vs sort-oracle equivalence over random weight vectors. Exit 0 iff
/// every trial passes; failures are printed with the seed needed to replay.
int cmd_oracle_check(const OracleCheckOptions& options, std::ostream& log);

struct SweepOptions {
  std::filesystem::path config;
  std::filesystem::path out;
  std::vector<double> p_grid;
  std::optional<std::uint64_t> seed;
};

int cmd_sweep_p(const SweepOptions& options, std::ostream& log);

struct QuantBenchOptions {
  std::filesystem::path config;
  std::filesystem::path out;
  std::vector<std::string> bits{"2", "4", "8", "exact"};
  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> seed;
};

/// Runs every query head under each estimator width with the same selector.
int cmd_quant_bench(const QuantBenchOptions& options, std::ostream& log);

struct BudgetCurveOptions {
  std::optional<std::filesystem::path> config;
  /// Rank-1 or rank-2 tensor of weight rows (each row normalized on load).
  std::optional<std::filesystem::path> weights;
  std::filesystem::path out;
  std::vector<double> p_grid;
  std::optional<std::uint64_t> seed;
};

int cmd_budget_curve(const BudgetCurveOptions& options, std::ostream& log);

}  // namespace topp::cli
