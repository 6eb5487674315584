// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string_view>
#include <vector>

#include "topp/attention.hpp"
#include "topp/pipeline.hpp"

namespace topp {

enum class WorkloadKind {
  gaussian_qk,        ///< i.i.d. standard normal q, K, V
  logit_temperature,  ///< K built so that q . k / sqrt(d) hits N(0,1) / temperature
  file,               ///< q, K, V read from tensor files
};

[[nodiscard]] std::string_view to_string(WorkloadKind kind) noexcept;
[[nodiscard]] WorkloadKind workload_kind_from_string(std::string_view name);

struct WorkloadSpec {
  WorkloadKind kind = WorkloadKind::gaussian_qk;
  std::size_t n = 1024;
  std::size_t d = 64;
  std::size_t heads = 1;
  std::size_t group_size = 1;
  double temperature = 1.0;
  /// Optional per-query-head temperatures (logit_temperature only).
  std::vector<double> head_temperatures;
  std::uint64_t seed = 0;
  std::size_t count = 1;  ///< query steps per prompt
  std::size_t prompts = 1;
  std::size_t layers = 1;
  /// Tensor files for kind == file: q is [heads, d]; K and V are [kv_heads, n, d] or [n, d].
  std::filesystem::path q_path;
  std::filesystem::path k_path;
  std::filesystem::path v_path;

  [[nodiscard]] std::size_t kv_heads() const noexcept { return heads / group_size; }
  [[nodiscard]] std::size_t item_count() const noexcept { return prompts * count * layers; }
  /// Throws InvalidArgument on non-positive dimensions or temperatures.
  void validate() const;
};

struct WorkloadItem {
  std::size_t prompt = 0;
  std::size_t step = 0;
  std::size_t layer = 0;
  AttentionProblem problem;
};

/// Generator seeded from (seed, prompt, step, layer) only, so each item can be
/// regenerated independently.
[[nodiscard]] std::mt19937_64 item_rng(std::uint64_t seed, std::size_t prompt, std::size_t step,
                                       std::size_t layer);

[[nodiscard]] WorkloadItem generate_item(const WorkloadSpec& spec, std::size_t prompt,
                                         std::size_t step, std::size_t layer);

/// Items ordered by prompt, then step, then layer.
[[nodiscard]] std::vector<WorkloadItem> generate_workload(const WorkloadSpec& spec);

/// Keys for query `q` whose scaled logits equal `logits` exactly (up to
/// rounding); the component orthogonal to q is standard normal noise.
[[nodiscard]] Matrix<float> keys_for_logits(std::span<const float> q,
                                            std::span<const double> logits, std::mt19937_64& rng);

/// Softmax of N(0,1) / temperature logits, for distribution-level experiments
/// that need no K or V.
[[nodiscard]] AttentionWeights random_weights(std::size_t n, double temperature,
                                              std::mt19937_64& rng);

}  // namespace topp
