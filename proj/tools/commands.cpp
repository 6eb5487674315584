// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "topp/config.hpp"
#include "topp/cost_model.hpp"
#include "topp/dynamism.hpp"
#include "topp/oracle.hpp"
#include "topp/pipeline.hpp"
#include "topp/pruner.hpp"
#include "topp/stats.hpp"
#include "topp/tensor_io.hpp"
#include "topp/workload.hpp"

namespace topp::cli {

using nlohmann::json;

namespace {

class OutputError : public Error {
 public:
  using Error::Error;
};

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw OutputError("cannot open " + path.string() + " for writing");
  out << contents;
  if (!out) throw OutputError("write failed for " + path.string());
}

std::string header_line(const std::vector<std::string>& columns) {
  return fmt::format("{}\n", fmt::join(columns, ","));
}

template <typename Body>
int guarded(std::ostream& log, Body&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const TensorIoError& e) {
    log << "i/o error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return kIoError;
  } catch (const OutputError& e) {
    log << "i/o error: " << e.what() << '\n';
    return kIoError;
  } catch (const NonFiniteError& e) {
    log << "numerical error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const DegenerateSelectionError& e) {
    log << "numerical error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const InvalidArgument& e) {
    log << "invalid argument: " << e.what() << '\n';
    return kConfigError;
  } catch (const DimensionError& e) {
    log << "shape error: " << e.what() << '\n';
    return kConfigError;
  }
}

RunConfig load_with_seed(const std::filesystem::path& path, std::optional<std::uint64_t> seed) {
  RunConfig cfg = load_config(path);
  if (seed) cfg.workload.seed = *seed;
  return cfg;
}

void require_finite_report(const PruneReport& r, const std::vector<float>& output) {
  const bool finite = std::isfinite(r.attained_true_mass) && std::isfinite(r.residual_error) &&
                      std::isfinite(r.error_bound) && std::isfinite(r.estimator_spearman) &&
                      std::all_of(output.begin(), output.end(),
                                  [](float x) { return std::isfinite(x); });
  if (!finite) throw NonFiniteError("pipeline produced a non-finite result");
}

json summary_json(const Summary& s) {
  return {{"count", s.count}, {"mean", s.mean}, {"std", s.stddev}, {"min", s.min}, {"max", s.max}};
}

json histogram_json(const Histogram& h) { return {{"edges", h.edges}, {"counts", h.counts}}; }

json axis_json(const AxisStats& a) {
  json per_key = json::object();
  for (const auto& [key, s] : a.per_key) per_key[std::to_string(key)] = summary_json(s);
  return {{"across_keys", summary_json(a.across_keys)},
          {"histogram", histogram_json(a.histogram)},
          {"per_key", per_key}};
}

}  // namespace

const std::vector<std::string>& run_csv_columns() {
  static const std::vector<std::string> columns{
      "prompt",          "step",            "layer",           "head",
      "n",               "b0",              "b1",              "attained_true_mass",
      "candidate_true_mass", "relative_true_mass", "estimated_mass", "estimator_spearman",
      "residual_error",  "error_bound",     "threshold",       "iterations",
      "estimator_bytes", "selector_units",  "estimator_units", "attention_units",
      "total_units",     "baseline_units",  "modeled_speedup", "modeled_bytes",
      "bypassed"};
  return columns;
}

const std::vector<std::string>& sweep_csv_columns() {
  static const std::vector<std::string> columns{
      "p", "mean_b0", "mean_b1", "mean_attained_mass", "mean_residual_error",
      "mean_error_bound", "mean_modeled_units", "mean_speedup"};
  return columns;
}

const std::vector<std::string>& quant_bench_csv_columns() {
  static const std::vector<std::string> columns{
      "item", "head", "bits", "p", "b0", "b1", "attained_true_mass", "estimated_mass",
      "estimator_spearman", "estimator_bytes", "memory_overhead"};
  return columns;
}

const std::vector<std::string>& budget_curve_csv_columns() {
  static const std::vector<std::string> columns{"item", "head", "p", "budget", "attained_mass",
                                                "entropy"};
  return columns;
}

std::string format_real(double value) { return fmt::format("{:.9g}", value); }

std::filesystem::path summary_path(const std::filesystem::path& csv) {
  auto p = csv;
  p.replace_extension();
  p += ".summary.json";
  return p;
}

// run -----------------------------------------------------------------------

int cmd_run(const RunOptions& options, std::ostream& log) {
  return guarded(log, [&] {
    const RunConfig cfg = load_with_seed(options.config, options.seed);
    const auto& spec = cfg.workload;

    std::string csv = header_line(run_csv_columns());
    DynamismCollector dynamism;
    double sum_b0 = 0.0, sum_b1 = 0.0, sum_mass = 0.0, sum_err = 0.0, sum_speedup = 0.0;
    double max_err = 0.0;
    std::size_t rows = 0;
    std::size_t bound_violations = 0;

    std::vector<std::array<std::size_t, 3>> tags;  // prompt, step, layer
    if (spec.kind == WorkloadKind::file) {
      tags.push_back({0, 0, 0});
    } else {
      for (std::size_t prompt = 0; prompt < spec.prompts; ++prompt)
        for (std::size_t step = 0; step < spec.count; ++step)
          for (std::size_t layer = 0; layer < spec.layers; ++layer)
            tags.push_back({prompt, step, layer});
    }
    const std::size_t items = tags.size();
    // The error bound only holds for unnormalized sparse outputs.
    const bool unnormalized = cfg.pipeline.output == Normalization::none;

    for (const auto& [prompt, step, layer] : tags) {
      const auto item = generate_item(spec, prompt, step, layer);
      const bool dense = cfg.is_bypassed(layer);
      const auto prepared = dense ? std::vector<KvHead>{} : prepare(item.problem, cfg.pipeline);
      const auto result = run_problem(item.problem, prepared, cfg.pipeline, dense);
      for (std::size_t h = 0; h < result.reports.size(); ++h) {
        const PruneReport& r = result.reports[h];
        require_finite_report(r, result.outputs[h]);
        dynamism.add({{item.prompt, item.step, item.layer, h}, static_cast<double>(r.b1)});
        csv += fmt::format(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            item.prompt, item.step, item.layer, h, r.n, r.b0, r.b1,
            format_real(r.attained_true_mass), format_real(r.candidate_true_mass),
            format_real(r.relative_true_mass), format_real(r.estimated_mass),
            format_real(r.estimator_spearman),
            format_real(r.residual_error), format_real(r.error_bound), format_real(r.threshold),
            r.iterations, r.estimator_bytes, format_real(r.cost.selector_units),
            format_real(r.cost.estimator_units), format_real(r.cost.attention_units),
            format_real(r.cost.total_units), format_real(r.cost.baseline_units),
            format_real(r.cost.speedup), format_real(r.cost.bytes), r.bypassed ? 1 : 0);
        sum_b0 += static_cast<double>(r.b0);
        sum_b1 += static_cast<double>(r.b1);
        sum_mass += r.attained_true_mass;
        sum_err += r.residual_error;
        sum_speedup += r.cost.speedup;
        max_err = std::max(max_err, r.residual_error);
        if (unnormalized && r.residual_error > r.error_bound + 1e-5) ++bound_violations;
        ++rows;
      }
    }
    write_file(options.out, csv);

    const double denom = rows > 0 ? static_cast<double>(rows) : 1.0;
    json summary;
    summary["config"] = json::parse(dump_config(cfg));
    summary["items"] = items;
    summary["rows"] = rows;
    summary["mean_b0"] = sum_b0 / denom;
    summary["mean_b1"] = sum_b1 / denom;
    summary["mean_attained_true_mass"] = sum_mass / denom;
    summary["mean_residual_error"] = sum_err / denom;
    summary["residual_error"] = max_err;
    if (unnormalized) {
      summary["error_bound_violations"] = bound_violations;
    } else {
      summary["error_bound_violations"] = nullptr;
    }
    summary["mean_modeled_speedup"] = sum_speedup / denom;
    if (const auto bits = quant_bits(cfg.pipeline.estimator)) {
      const Fraction overhead = memory_overhead(*bits);
      summary["memory_overhead"] = fmt::format("{}/{}", overhead.numerator(), overhead.denominator());
    } else {
      summary["memory_overhead"] = "0/1";
    }
    if (dynamism.size() > 0) {
      const auto stats = dynamism.finish();
      summary["dynamism"] = {{"overall", summary_json(stats.overall)},
                             {"histogram", histogram_json(stats.overall_histogram)},
                             {"prompt", axis_json(stats.prompt)},
                             {"step", axis_json(stats.step)},
                             {"layer", axis_json(stats.layer)},
                             {"head", axis_json(stats.head)}};
    } else {
      summary["dynamism"] = nullptr;
    }
    write_file(summary_path(options.out), summary.dump(2) + "\n");
    log << "run: " << rows << " rows from " << items << " items -> " << options.out.string() << '\n';
    return kOk;
  });
}

// oracle-check --------------------------------------------------------------

namespace {

constexpr std::size_t kCheckSizes[] = {16, 64, 256, 1024, 4096};
constexpr double kCheckTemperatures[] = {0.25, 0.5, 1.0, 2.0, 4.0};

// Deterministic weight vector for one trial. Every seventh trial rounds its
// logits to a coarse grid so that ties occur.
AttentionWeights check_weights(std::uint64_t seed, std::size_t trial, std::size_t& n,
                               double& temperature, bool& tied) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32)};
  std::mt19937_64 rng(seq);
  n = kCheckSizes[trial % std::size(kCheckSizes)];
  temperature = kCheckTemperatures[(trial / std::size(kCheckSizes)) % std::size(kCheckTemperatures)];
  tied = trial % 7 == 6;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> logits(n);
  for (double& z : logits) {
    z = normal(rng) / temperature;
    if (tied) z = std::round(z * 2.0) / 2.0;
  }
  return softmax<double>(logits);
}

bool all_distinct(const AttentionWeights& w) {
  std::vector<double> v(w.values().begin(), w.values().end());
  std::sort(v.begin(), v.end());
  return std::adjacent_find(v.begin(), v.end()) == v.end();
}

}  // namespace

int cmd_oracle_check(const OracleCheckOptions& options, std::ostream& log) {
  return guarded(log, [&] {
    BinarySearchConfig cfg;
    if (options.epsilon) cfg.epsilon = *options.epsilon;
    cfg.max_iters = options.max_iters;
    for (double p : options.p_grid) validate_threshold(p);
    cfg.validate();

    if (options.trials == 0) {
      log << "oracle-check: zero trials requested, nothing to check\n";
      return kOk;
    }

    std::size_t failures = 0;
    std::size_t checks = 0;
    for (std::size_t trial = 0; trial < options.trials; ++trial) {
      std::size_t n = 0;
      double temperature = 0.0;
      bool tied = false;
      const auto w = check_weights(options.seed, trial, n, temperature, tied);
      const bool distinct = all_distinct(w);
      for (double p : options.p_grid) {
        cfg.p = p;
        const auto pruned = binary_search_top_p(w, cfg);
        const auto oracle = oracle_top_p(w, p);
        ++checks;

        std::string reason;
        const auto& sel = pruned.selection;
        if (!reaches(sel.attained_mass(), p)) {
          reason = fmt::format("attained mass {} < p", format_real(sel.attained_mass()));
        } else if (distinct && sel.size() != oracle.size()) {
          reason = fmt::format("cardinality {} != oracle {}", sel.size(), oracle.size());
        } else if (sel.size() < oracle.size() || !oracle.is_subset_of(sel)) {
          reason = fmt::format("selection ({}) does not contain the oracle set ({})", sel.size(),
                               oracle.size());
        } else if (pruned.iterations > cfg.max_iters) {
          reason = fmt::format("{} iterations exceed the cap", pruned.iterations);
        } else {
          double lightest = 1.0;
          for (std::size_t i : sel.indices()) lightest = std::min(lightest, w[i]);
          for (std::size_t i : sel.indices()) {
            if (!oracle.contains(i) && w[i] != lightest) {
              reason = fmt::format("extra token {} is not tied at the threshold", i);
              break;
            }
          }
        }
        if (!reason.empty()) {
          ++failures;
          if (failures <= 20) {
            log << fmt::format("FAIL seed={} trial={} n={} temperature={} tied={} p={}: {}\n",
                               options.seed, trial, n, temperature, tied, p, reason);
          }
        }
      }
    }
    log << fmt::format("oracle-check: {} trials, {} checks, {} failures\n", options.trials, checks,
                       failures);
    return failures == 0 ? kOk : kCheckFailed;
  });
}

// sweep-p -------------------------------------------------------------------

int cmd_sweep_p(const SweepOptions& options, std::ostream& log) {
  return guarded(log, [&] {
    const RunConfig cfg = load_with_seed(options.config, options.seed);
    std::vector<double> grid = options.p_grid;
    if (grid.empty()) grid = {cfg.pipeline.prune.p};

    std::vector<AttentionProblem> problems;
    for (auto& item : generate_workload(cfg.workload)) {
      if (!cfg.is_bypassed(item.layer)) problems.push_back(std::move(item.problem));
    }
    const auto rows = sweep_p(problems, cfg.pipeline, grid);

    std::string csv = header_line(sweep_csv_columns());
    for (const auto& r : rows) {
      csv += fmt::format("{},{},{},{},{},{},{},{}\n", format_real(r.p), format_real(r.mean_b0),
                         format_real(r.mean_b1), format_real(r.mean_attained_mass),
                         format_real(r.mean_residual_error), format_real(r.mean_error_bound),
                         format_real(r.mean_modeled_units), format_real(r.mean_speedup));
    }
    write_file(options.out, csv);
    log << "sweep-p: " << rows.size() << " grid points over " << problems.size()
        << " problems -> " << options.out.string() << '\n';
    return kOk;
  });
}

// quant-bench ---------------------------------------------------------------

int cmd_quant_bench(const QuantBenchOptions& options, std::ostream& log) {
  return guarded(log, [&] {
    RunConfig cfg = load_with_seed(options.config, options.seed);
    if (options.trials) {
      cfg.workload.count = *options.trials;
      cfg.workload.prompts = 1;
      cfg.workload.layers = 1;
      cfg.bypass_layers.clear();
    }
    std::vector<EstimatorMode> modes;
    for (const auto& b : options.bits) modes.push_back(estimator_mode_from_string(b));

    std::string csv = header_line(quant_bench_csv_columns());
    std::size_t item_index = 0;
    for (const auto& item : generate_workload(cfg.workload)) {
      for (EstimatorMode mode : modes) {
        PipelineConfig pc = cfg.pipeline;
        pc.estimator = mode;
        const auto prepared = prepare(item.problem, pc);
        const auto result = run_problem(item.problem, prepared, pc);
        const auto bits = quant_bits(mode);
        const Fraction overhead = bits ? memory_overhead(*bits) : Fraction(0);
        for (std::size_t h = 0; h < result.reports.size(); ++h) {
          const auto& r = result.reports[h];
          require_finite_report(r, result.outputs[h]);
          csv += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", item_index, h, to_string(mode),
                             format_real(pc.prune.p), r.b0, r.b1, format_real(r.attained_true_mass),
                             format_real(r.estimated_mass), format_real(r.estimator_spearman),
                             r.estimator_bytes,
                             format_real(static_cast<double>(overhead.numerator()) /
                                         static_cast<double>(overhead.denominator())));
        }
      }
      ++item_index;
    }
    write_file(options.out, csv);
    log << "quant-bench: " << item_index << " items x " << modes.size() << " modes -> "
        << options.out.string() << '\n';
    return kOk;
  });
}

// budget-curve --------------------------------------------------------------

int cmd_budget_curve(const BudgetCurveOptions& options, std::ostream& log) {
  return guarded(log, [&] {
    if (options.p_grid.empty()) throw InvalidArgument("budget-curve: empty p grid");
    std::string csv = header_line(budget_curve_csv_columns());
    auto emit = [&](std::size_t item, std::size_t head, const AttentionWeights& w) {
      const double h = entropy(w);
      for (const auto& pt : budget_curve(w, options.p_grid)) {
        csv += fmt::format("{},{},{},{},{},{}\n", item, head, format_real(pt.p), pt.budget,
                           format_real(pt.attained_mass), format_real(h));
      }
    };

    if (options.weights) {
      const Matrix<float> rows = to_matrix(read_tensor(*options.weights));
      for (std::size_t r = 0; r < rows.rows(); ++r) {
        auto row = rows.row(r);
        emit(0, r, AttentionWeights::normalize(std::vector<double>(row.begin(), row.end())));
      }
    } else if (options.config) {
      const RunConfig cfg = load_with_seed(*options.config, options.seed);
      std::size_t index = 0;
      for (const auto& item : generate_workload(cfg.workload)) {
        const auto& p = item.problem;
        const std::size_t group = p.heads() / p.kv_heads();
        for (std::size_t h = 0; h < p.heads(); ++h) {
          emit(index, h, attention_weights<float>(p.queries.row(h), p.keys[h / group]));
        }
        ++index;
      }
    } else {
      throw ConfigError("budget-curve: need --config or --weights");
    }
    write_file(options.out, csv);
    log << "budget-curve -> " << options.out.string() << '\n';
    return kOk;
  });
}

}  // namespace topp::cli
