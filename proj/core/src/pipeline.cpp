// SPDX-License-Identifier: Apache-2.0

#include "topp/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "topp/oracle.hpp"
#include "topp/stats.hpp"

namespace topp {

std::string_view to_string(EstimatorMode mode) noexcept {
  switch (mode) {
    case EstimatorMode::two_bit: return "2";
    case EstimatorMode::four_bit: return "4";
    case EstimatorMode::eight_bit: return "8";
    case EstimatorMode::exact: return "exact";
  }
  return "unknown";
}

EstimatorMode estimator_mode_from_string(std::string_view name) {
  for (auto mode : {EstimatorMode::two_bit, EstimatorMode::four_bit, EstimatorMode::eight_bit,
                    EstimatorMode::exact}) {
    if (name == to_string(mode)) return mode;
  }
  throw ConfigError("unknown estimator mode '" + std::string(name) +
                    "' (expected 2, 4, 8 or exact)");
}

std::optional<QuantBits> quant_bits(EstimatorMode mode) noexcept {
  switch (mode) {
    case EstimatorMode::two_bit: return QuantBits::two;
    case EstimatorMode::four_bit: return QuantBits::four;
    case EstimatorMode::eight_bit: return QuantBits::eight;
    case EstimatorMode::exact: return std::nullopt;
  }
  return std::nullopt;
}

Fraction estimator_cost(EstimatorMode mode) {
  const auto bits = quant_bits(mode);
  return bits ? estimator_cost(*bits) : Fraction(1);
}

void GroupMap::validate(std::size_t heads) const {
  if (group_size == 0 || heads == 0 || heads % group_size != 0) {
    throw InvalidArgument("group map: " + std::to_string(heads) +
                          " query heads do not divide into groups of " +
                          std::to_string(group_size));
  }
}

void PipelineConfig::validate() const {
  selector.validate();
  prune.validate();
  if (cache_page_size == 0) throw InvalidArgument("pipeline: cache_page_size must be >= 1");
  if (selector_cost < Fraction(0)) throw InvalidArgument("pipeline: selector cost must be >= 0");
  if (group_map && group_map->group_size == 0) {
    throw InvalidArgument("pipeline: group_size must be >= 1");
  }
}

CostFractions PipelineConfig::cost_fractions() const {
  return {selector_cost, estimator_cost(estimator)};
}

// KvHead --------------------------------------------------------------------

template <typename T>
KvHead KvHead::build(const Matrix<T>& keys, const PipelineConfig& config) {
  config.validate();
  if (keys.rows() == 0) throw DimensionError("KvHead: empty key matrix");
  Matrix<float> narrow = keys.template cast<float>();
  KvHead kv;
  kv.n_ = keys.rows();
  if (const auto bits = quant_bits(config.estimator)) {
    PagedQuantKeyCache cache(narrow.cols(), config.cache_page_size, *bits);
    for (std::size_t t = 0; t < narrow.rows(); ++t) cache.append(narrow.row(t));
    kv.cache_.emplace(std::move(cache));
  }
  if (config.selector.kind == SelectorKind::quest) {
    kv.metadata_ = build_page_metadata(narrow, config.selector.page_size);
  }
  if (config.selector.kind == SelectorKind::channel_pruned) {
    kv.channels_.emplace(build_channel_index(narrow, config.selector.top_channels));
  }
  return kv;
}

namespace {

template <typename T>
std::vector<float> narrow_query(std::span<const T> q) {
  return std::vector<float>(q.begin(), q.end());
}

template <typename T>
TokenSelection select_candidates(std::span<const T> q, const KvHead& kv,
                                 const PipelineConfig& config) {
  const auto qf = narrow_query(q);
  SelectorInputs in;
  in.q = qf;
  in.n = kv.size();
  in.metadata = &kv.metadata();
  in.channels = kv.channels();
  return run_selector(config.selector, in);
}

struct CandidateEstimate {
  std::vector<double> logits;
  std::size_t bytes = 0;
};

template <typename T>
CandidateEstimate estimate_candidates(std::span<const T> q, const Matrix<T>& keys,
                                      const KvHead& kv, const TokenSelection& candidates,
                                      EstimatorMode mode) {
  CandidateEstimate est;
  if (mode == EstimatorMode::exact) {
    const T scale = T(1) / std::sqrt(static_cast<T>(q.size()));
    est.logits.reserve(candidates.size());
    for (std::size_t t : candidates.indices()) {
      auto k = keys.row(t);
      const T dot = std::inner_product(q.begin(), q.end(), k.begin(), T(0));
      est.logits.push_back(static_cast<double>(dot * scale));
    }
    est.bytes = candidates.size() * keys.cols() * 2;
    return est;
  }
  if (kv.cache() == nullptr) throw InvalidArgument("pipeline: quantized estimator without cache");
  const auto qf = narrow_query(q);
  auto scores = estimate_scores(qf, *kv.cache(), candidates);
  est.logits = std::move(scores.logits);
  est.bytes = scores.bytes_touched;
  return est;
}

template <typename T>
std::vector<T> attend(const AttentionWeights& weights, const Matrix<T>& values,
                      const TokenSelection& selection, Normalization normalization) {
  // An empty selection (p = 0) attends to nothing.
  if (selection.empty()) return std::vector<T>(values.cols(), T(0));
  return sparse_attention(weights, values, selection, normalization);
}

// Exact quantities for one head, shared by the report fields.
template <typename T>
struct ExactHead {
  std::vector<T> logits;
  AttentionWeights weights;
  std::vector<T> full_output;
  double value_norm = 0.0;
};

template <typename T>
ExactHead<T> exact_head(std::span<const T> q, const Matrix<T>& keys, const Matrix<T>& values) {
  if (keys.rows() != values.rows() || keys.cols() != values.cols()) {
    throw DimensionError("pipeline: K and V shapes differ");
  }
  ExactHead<T> e;
  e.logits = attention_logits(q, keys);
  e.weights = softmax<T>(e.logits);
  e.full_output =
      sparse_attention(e.weights, values, TokenSelection::all(keys.rows()), Normalization::none);
  e.value_norm = frobenius_norm(values);
  return e;
}

template <typename T>
double candidate_spearman(const std::vector<double>& estimated, const std::vector<T>& exact_logits,
                          const TokenSelection& candidates) {
  std::vector<double> exact;
  exact.reserve(candidates.size());
  for (std::size_t t : candidates.indices()) exact.push_back(static_cast<double>(exact_logits[t]));
  return spearman(estimated, exact);
}

template <typename T>
void fill_report(PruneReport& r, const ExactHead<T>& exact, const std::vector<T>& output,
                 const TokenSelection& candidates, const TokenSelection& selection,
                 const PipelineConfig& config, std::size_t head_dim) {
  r.n = exact.weights.size();
  r.b0 = candidates.size();
  r.b1 = selection.size();
  r.candidate_true_mass = std::min(1.0, candidates.mass_under(exact.weights));
  r.attained_true_mass = std::min(1.0, selection.mass_under(exact.weights));
  r.relative_true_mass = r.candidate_true_mass > 0.0
                             ? std::min(1.0, r.attained_true_mass / r.candidate_true_mass)
                             : 0.0;
  r.residual_error = output_error<T>(exact.full_output, output);
  r.error_bound = std::max(0.0, 1.0 - r.attained_true_mass) * exact.value_norm;
  r.loads = {r.n, r.b0, r.b1};
  r.cost = charge(r.loads, config.cost_fractions(), 2.0 * static_cast<double>(head_dim));
}

}  // namespace

template <typename T>
HeadResult<T> run_head(std::span<const T> q, const Matrix<T>& keys, const Matrix<T>& values,
                       const KvHead& kv, const PipelineConfig& config) {
  config.validate();
  if (kv.size() != keys.rows()) throw DimensionError("run_head: KvHead built for another cache");
  const auto exact = exact_head(q, keys, values);

  const TokenSelection candidates = select_candidates(q, kv, config);
  if (candidates.empty()) throw InvalidArgument("run_head: selector returned no candidates");
  const auto estimate = estimate_candidates(q, keys, kv, candidates, config.estimator);
  const AttentionWeights candidate_weights = softmax<double>(estimate.logits);

  HeadResult<T> result;
  result.outcome = prune_restricted(candidate_weights, candidates, config.prune);
  const TokenSelection& selection = result.outcome.selection;
  result.output = attend(exact.weights, values, selection, config.output);

  PruneReport& r = result.report;
  fill_report(r, exact, result.output, candidates, selection, config, keys.cols());
  r.estimated_mass = selection.attained_mass();
  r.estimator_spearman = candidate_spearman(estimate.logits, exact.logits, candidates);
  r.threshold = result.outcome.threshold;
  r.iterations = result.outcome.iterations;
  r.estimator_bytes = estimate.bytes;
  result.outcome.selection.measure(exact.weights);
  return result;
}

template <typename T>
HeadResult<T> run_dense_head(std::span<const T> q, const Matrix<T>& keys, const Matrix<T>& values,
                             const PipelineConfig& config) {
  const auto exact = exact_head(q, keys, values);
  HeadResult<T> result;
  result.outcome.selection = TokenSelection::all(keys.rows());
  result.outcome.selection.measure(exact.weights);
  result.output = exact.full_output;
  PruneReport& r = result.report;
  const auto& all = result.outcome.selection;
  fill_report(r, exact, result.output, all, all, config, keys.cols());
  r.estimated_mass = 1.0;
  r.estimator_spearman = 1.0;
  r.bypassed = true;
  // Dense attention loads every row once and runs neither selector nor estimator.
  r.loads = {0, 0, r.n};
  r.cost = charge(r.loads, config.cost_fractions(), 2.0 * static_cast<double>(keys.cols()));
  return result;
}

template <typename T>
GroupResult<T> run_grouped(const Matrix<T>& queries, const Matrix<T>& keys,
                           const Matrix<T>& values, const KvHead& kv,
                           const PipelineConfig& config) {
  config.validate();
  const std::size_t heads = queries.rows();
  if (heads == 0) throw InvalidArgument("run_grouped: no query heads");
  if (kv.size() != keys.rows()) throw DimensionError("run_grouped: KvHead built for another cache");

  std::vector<TokenSelection> per_head_candidates;
  per_head_candidates.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    per_head_candidates.push_back(select_candidates<T>(queries.row(h), kv, config));
  }

  GroupResult<T> group;
  group.candidates = group_union(per_head_candidates);
  if (group.candidates.empty()) throw InvalidArgument("run_grouped: selector returned no candidates");

  std::vector<CandidateEstimate> estimates;
  std::vector<AttentionWeights> candidate_weights;
  std::vector<PruneOutcome> outcomes;
  std::vector<TokenSelection> pruned;
  for (std::size_t h = 0; h < heads; ++h) {
    estimates.push_back(
        estimate_candidates<T>(queries.row(h), keys, kv, group.candidates, config.estimator));
    candidate_weights.push_back(softmax<double>(estimates.back().logits));
    outcomes.push_back(prune_restricted(candidate_weights.back(), group.candidates, config.prune));
    pruned.push_back(outcomes.back().selection);
  }
  group.selection = group_union(pruned);

  // Union mass under each head's candidate-local estimate.
  const auto ids = group.candidates.indices();
  for (std::size_t h = 0; h < heads; ++h) {
    const auto exact = exact_head<T>(queries.row(h), keys, values);
    group.outputs.push_back(attend(exact.weights, values, group.selection, config.output));

    PruneReport r;
    fill_report(r, exact, group.outputs.back(), group.candidates, group.selection, config,
                keys.cols());
    double est_mass = 0.0;
    for (std::size_t j = 0; j < ids.size(); ++j) {
      if (group.selection.contains(ids[j])) est_mass += candidate_weights[h][j];
    }
    r.estimated_mass = std::min(1.0, est_mass);
    r.estimator_spearman = candidate_spearman(estimates[h].logits, exact.logits, group.candidates);
    r.threshold = outcomes[h].threshold;
    r.iterations = outcomes[h].iterations;
    r.estimator_bytes = estimates[h].bytes;
    group.reports.push_back(r);
  }
  return group;
}

// Problems ------------------------------------------------------------------

void AttentionProblem::validate() const {
  if (queries.rows() == 0 || queries.cols() == 0) {
    throw DimensionError("problem: need at least one query head of positive width");
  }
  if (keys.empty() || keys.size() != values.size()) {
    throw DimensionError("problem: need matching K and V lists with at least one KV head");
  }
  if (queries.rows() % keys.size() != 0) {
    throw DimensionError("problem: query heads are not a multiple of KV heads");
  }
  const std::size_t n = keys.front().rows();
  for (std::size_t k = 0; k < keys.size(); ++k) {
    if (keys[k].rows() != n || values[k].rows() != n || n == 0) {
      throw DimensionError("problem: every KV head needs the same non-zero context length");
    }
    if (keys[k].cols() != queries.cols() || values[k].cols() != queries.cols()) {
      throw DimensionError("problem: head dimension mismatch");
    }
  }
}

std::vector<KvHead> prepare(const AttentionProblem& problem, const PipelineConfig& config) {
  problem.validate();
  std::vector<KvHead> out;
  out.reserve(problem.kv_heads());
  for (const auto& k : problem.keys) out.push_back(KvHead::build(k, config));
  return out;
}

ProblemResult run_problem(const AttentionProblem& problem, std::span<const KvHead> prepared,
                          const PipelineConfig& config, bool dense) {
  problem.validate();
  if (!dense && prepared.size() != problem.kv_heads()) {
    throw DimensionError("run_problem: prepared KV heads do not match the problem");
  }
  const std::size_t group = problem.heads() / problem.kv_heads();
  if (config.group_map) {
    config.group_map->validate(problem.heads());
    if (config.group_map->group_size != group) {
      throw InvalidArgument("run_problem: group_size " +
                            std::to_string(config.group_map->group_size) +
                            " does not match heads / kv_heads = " + std::to_string(group));
    }
  }

  ProblemResult result;
  for (std::size_t k = 0; k < problem.kv_heads(); ++k) {
    const auto& keys = problem.keys[k];
    const auto& values = problem.values[k];
    if (config.group_map && !dense) {
      Matrix<float> queries(group, problem.queries.cols());
      for (std::size_t h = 0; h < group; ++h) {
        auto src = problem.queries.row(k * group + h);
        std::copy(src.begin(), src.end(), queries.row(h).begin());
      }
      auto g = run_grouped(queries, keys, values, prepared[k], config);
      for (std::size_t h = 0; h < group; ++h) {
        result.outputs.push_back(std::move(g.outputs[h]));
        result.reports.push_back(g.reports[h]);
      }
      continue;
    }
    for (std::size_t h = 0; h < group; ++h) {
      auto q = problem.queries.row(k * group + h);
      auto r = dense ? run_dense_head<float>(q, keys, values, config)
                     : run_head<float>(q, keys, values, prepared[k], config);
      result.outputs.push_back(std::move(r.output));
      result.reports.push_back(r.report);
    }
  }
  return result;
}

std::vector<SweepRow> sweep_p(std::span<const AttentionProblem> problems,
                              const PipelineConfig& config, std::span<const double> p_grid) {
  for (double p : p_grid) validate_threshold(p);
  if (!std::is_sorted(p_grid.begin(), p_grid.end())) {
    throw InvalidArgument("sweep_p: p grid must be sorted ascending");
  }
  std::vector<std::vector<KvHead>> prepared;
  prepared.reserve(problems.size());
  for (const auto& problem : problems) prepared.push_back(prepare(problem, config));

  std::vector<SweepRow> rows;
  for (double p : p_grid) {
    PipelineConfig cfg = config;
    cfg.prune.p = p;
    SweepRow row;
    row.p = p;
    std::size_t count = 0;
    for (std::size_t i = 0; i < problems.size(); ++i) {
      const auto result = run_problem(problems[i], prepared[i], cfg);
      for (const auto& r : result.reports) {
        row.mean_b0 += static_cast<double>(r.b0);
        row.mean_b1 += static_cast<double>(r.b1);
        row.mean_attained_mass += r.attained_true_mass;
        row.mean_residual_error += r.residual_error;
        row.mean_error_bound += r.error_bound;
        row.mean_modeled_units += r.cost.total_units;
        row.mean_speedup += r.cost.speedup;
        ++count;
      }
    }
    if (count > 0) {
      const double c = static_cast<double>(count);
      row.mean_b0 /= c;
      row.mean_b1 /= c;
      row.mean_attained_mass /= c;
      row.mean_residual_error /= c;
      row.mean_error_bound /= c;
      row.mean_modeled_units /= c;
      row.mean_speedup /= c;
    }
    rows.push_back(row);
  }
  return rows;
}

#define TOPP_INSTANTIATE(T)                                                                     \
  template KvHead KvHead::build<T>(const Matrix<T>&, const PipelineConfig&);                    \
  template HeadResult<T> run_head<T>(std::span<const T>, const Matrix<T>&, const Matrix<T>&,    \
                                     const KvHead&, const PipelineConfig&);                     \
  template HeadResult<T> run_dense_head<T>(std::span<const T>, const Matrix<T>&,                \
                                           const Matrix<T>&, const PipelineConfig&);            \
  template GroupResult<T> run_grouped<T>(const Matrix<T>&, const Matrix<T>&, const Matrix<T>&, \
                                         const KvHead&, const PipelineConfig&);

TOPP_INSTANTIATE(float)
TOPP_INSTANTIATE(double)

#undef TOPP_INSTANTIATE

}  // namespace topp
