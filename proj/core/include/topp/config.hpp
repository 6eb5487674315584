// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "topp/pipeline.hpp"
#include "topp/workload.hpp"

namespace topp {

/// A full experiment description: what to generate and how to run it.
///
/// The document is JSON with one object per section:
///
///   {
///     "workload":  {"kind": "gaussian_qk", "n": 4096, "d": 128, "heads": 4,
///                   "group_size": 1, "temperature": 1.0, "seed": 7, "count": 2},
///     "selector":  {"kind": "quest", "budget_fraction": 0.25, "page_size": 16},
///     "prune":     {"p": 0.9, "epsilon": 1e-15, "max_iters": 64},
///     "estimator": {"bits": "4", "page_size": 16},
///     "pipeline":  {"renormalize_output": true, "group_union": false,
///                   "bypass_layers": [0, 1], "selector_cost": "1/16"}
///   }
///
/// Every section and key is optional; unknown sections or keys are errors.
struct RunConfig {
  WorkloadSpec workload;
  PipelineConfig pipeline;
  /// Layers that run dense attention. Defaults to {0, 1} when the workload has
  /// more than one layer and the document does not say otherwise.
  std::vector<std::size_t> bypass_layers;

  [[nodiscard]] bool is_bypassed(std::size_t layer) const;
};

/// Throws ConfigError on malformed JSON, unknown keys, wrong types or values
/// that fail validation.
[[nodiscard]] RunConfig parse_config(std::string_view text);

/// Reads and parses a config file. Throws ConfigError (including for a file
/// that cannot be read).
[[nodiscard]] RunConfig load_config(const std::filesystem::path& path);

/// Canonical JSON of the effective configuration.
[[nodiscard]] std::string dump_config(const RunConfig& config);

}  // namespace topp
