// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "topp/attention.hpp"
#include "topp/cost_model.hpp"
#include "topp/dynamism.hpp"
#include "topp/matrix.hpp"
#include "topp/pruner.hpp"
#include "topp/quant_cache.hpp"
#include "topp/selectors.hpp"

namespace topp {

/// How candidate weights are estimated before pruning.
enum class EstimatorMode { two_bit, four_bit, eight_bit, exact };

[[nodiscard]] std::string_view to_string(EstimatorMode mode) noexcept;
/// Accepts "2", "4", "8" and "exact". Throws ConfigError otherwise.
[[nodiscard]] EstimatorMode estimator_mode_from_string(std::string_view name);
/// Code width of a quantized mode; nullopt for exact.
[[nodiscard]] std::optional<QuantBits> quant_bits(EstimatorMode mode) noexcept;
/// Per-candidate load cost: bits / 16, or 1 for exact.
[[nodiscard]] Fraction estimator_cost(EstimatorMode mode);

/// Query heads sharing one KV head.
struct GroupMap {
  std::size_t group_size = 1;

  [[nodiscard]] std::size_t group_of(std::size_t head) const noexcept { return head / group_size; }
  /// Throws InvalidArgument unless `heads` is a positive multiple of group_size.
  void validate(std::size_t heads) const;
};

struct PipelineConfig {
  SelectorConfig selector;
  BinarySearchConfig prune;
  EstimatorMode estimator = EstimatorMode::four_bit;
  /// Group-union selection when set; otherwise every query head is independent.
  std::optional<GroupMap> group_map;
  Normalization output = Normalization::renormalize;
  Fraction selector_cost{1, 16};
  /// Page size of the quantized estimator cache.
  std::size_t cache_page_size = 16;

  void validate() const;
  [[nodiscard]] CostFractions cost_fractions() const;
};

/// Everything measured while running one query head through the pipeline.
struct PruneReport {
  std::size_t n = 0;
  std::size_t b0 = 0;
  std::size_t b1 = 0;
  double attained_true_mass = 0.0;    ///< final selection under the exact weights
  double candidate_true_mass = 0.0;   ///< candidate set under the exact weights
  /// attained_true_mass / candidate_true_mass: the pruner's share of the
  /// exact mass it was offered.
  double relative_true_mass = 0.0;
  double estimated_mass = 0.0;        ///< final selection under the renormalized estimate
  double estimator_spearman = 0.0;    ///< estimated vs exact logits over candidates
  double residual_error = 0.0;        ///< ||o - o_hat||_2
  double error_bound = 0.0;           ///< (1 - attained_true_mass) * ||V||_F
  double threshold = 0.0;
  int iterations = 0;
  std::size_t estimator_bytes = 0;
  TokenLoads loads;
  ModeledCost cost;
  bool bypassed = false;
};

/// Per-KV-head structures derived from the key cache once and shared by every
/// query that attends to it. Immutable after build().
class KvHead {
 public:
  template <typename T>
  [[nodiscard]] static KvHead build(const Matrix<T>& keys, const PipelineConfig& config);

  [[nodiscard]] std::size_t size() const noexcept { return n_; }
  [[nodiscard]] const PagedQuantKeyCache* cache() const noexcept {
    return cache_ ? &*cache_ : nullptr;
  }
  [[nodiscard]] const std::vector<PageMetadata>& metadata() const noexcept { return metadata_; }
  [[nodiscard]] const ChannelIndex* channels() const noexcept {
    return channels_ ? &*channels_ : nullptr;
  }

 private:
  std::size_t n_ = 0;
  std::optional<PagedQuantKeyCache> cache_;
  std::vector<PageMetadata> metadata_;
  std::optional<ChannelIndex> channels_;
};

template <typename T>
struct HeadResult {
  std::vector<T> output;
  PruneOutcome outcome;
  PruneReport report;
};

/// Selector -> estimate -> softmax over candidates -> top-p prune -> sparse
/// attention, for one query head.
template <typename T>
[[nodiscard]] HeadResult<T> run_head(std::span<const T> q, const Matrix<T>& keys,
                                     const Matrix<T>& values, const KvHead& kv,
                                     const PipelineConfig& config);

/// Dense attention reported in the same shape (B0 = B1 = n). Used for layers
/// exempt from sparsification.
template <typename T>
[[nodiscard]] HeadResult<T> run_dense_head(std::span<const T> q, const Matrix<T>& keys,
                                           const Matrix<T>& values, const PipelineConfig& config);

template <typename T>
struct GroupResult {
  std::vector<std::vector<T>> outputs;  ///< one per query head in the group
  std::vector<PruneReport> reports;     ///< one per query head
  TokenSelection candidates;            ///< union of per-head selector outputs
  TokenSelection selection;             ///< union of per-head pruned sets, shared by all heads
};

/// Query heads of one group (rows of `queries`) over their shared KV head.
/// Candidates are unioned across heads before estimation; every head then
/// attends to the union of the per-head pruned sets.
template <typename T>
[[nodiscard]] GroupResult<T> run_grouped(const Matrix<T>& queries, const Matrix<T>& keys,
                                         const Matrix<T>& values, const KvHead& kv,
                                         const PipelineConfig& config);

/// One decoding step of one layer: query heads plus the KV heads they read.
struct AttentionProblem {
  Matrix<float> queries;              ///< heads x d
  std::vector<Matrix<float>> keys;    ///< one n x d matrix per KV head
  std::vector<Matrix<float>> values;  ///< one n x d matrix per KV head

  [[nodiscard]] std::size_t heads() const noexcept { return queries.rows(); }
  [[nodiscard]] std::size_t kv_heads() const noexcept { return keys.size(); }
  /// Throws DimensionError on inconsistent shapes.
  void validate() const;
};

struct ProblemResult {
  std::vector<std::vector<float>> outputs;  ///< per query head
  std::vector<PruneReport> reports;         ///< per query head
};

/// Builds the KvHead structures for every KV head of `problem`.
[[nodiscard]] std::vector<KvHead> prepare(const AttentionProblem& problem,
                                          const PipelineConfig& config);

/// Runs every query head. Heads map to KV head h / (heads / kv_heads). With a
/// group map, each KV head's query group goes through run_grouped. `dense`
/// bypasses sparsification, in which case `prepared` may be empty.
[[nodiscard]] ProblemResult run_problem(const AttentionProblem& problem,
                                        std::span<const KvHead> prepared,
                                        const PipelineConfig& config, bool dense = false);

struct SweepRow {
  double p = 0.0;
  double mean_b0 = 0.0;
  double mean_b1 = 0.0;
  double mean_attained_mass = 0.0;
  double mean_residual_error = 0.0;
  double mean_error_bound = 0.0;
  double mean_modeled_units = 0.0;
  double mean_speedup = 0.0;
};

/// Runs every problem at each threshold of an ascending grid, reusing the
/// prepared caches across thresholds. Means are over all query heads.
[[nodiscard]] std::vector<SweepRow> sweep_p(std::span<const AttentionProblem> problems,
                                            const PipelineConfig& config,
                                            std::span<const double> p_grid);

}  // namespace topp
