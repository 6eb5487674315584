// SPDX-License-Identifier: Apache-2.0

#include "topp/pruner.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "topp/oracle.hpp"

namespace topp {

namespace {
constexpr double kInputMassTolerance = 1e-4;
constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace

void BinarySearchConfig::validate() const {
  validate_threshold(p);
  if (!(epsilon > 0.0)) throw InvalidArgument("BinarySearchConfig: epsilon must be > 0");
  if (max_iters < 1) throw InvalidArgument("BinarySearchConfig: max_iters must be >= 1");
}

PruneOutcome binary_search_top_p(const AttentionWeights& weights,
                                 const BinarySearchConfig& config) {
  config.validate();
  const auto w = weights.values();
  const std::size_t n = w.size();

  double total = 0.0;
  for (double x : w) total += x;
  if (n == 0 || std::abs(total - 1.0) > kInputMassTolerance) {
    throw InvalidArgument("binary_search_top_p: weights are not normalized (mass " +
                          std::to_string(total) + ")");
  }

  PruneOutcome out;
  if (config.p <= 0.0) {
    out.selection = TokenSelection::none(n);
    out.threshold = kInf;
    return out;
  }

  double lo = 0.0;
  double hi = weights.max();
  for (;;) {
    const double mid = 0.5 * (lo + hi);
    double mass_at_mid = 0.0;
    double min_above_lo = kInf;
    double max_within_hi = -kInf;
    for (double x : w) {
      if (x >= mid) mass_at_mid += x;
      if (x > lo && x < min_above_lo) min_above_lo = x;
      if (x <= hi && x > max_within_hi) max_within_hi = x;
    }
    ++out.iterations;
    if (reaches(mass_at_mid, config.p)) {
      lo = mid;
    } else {
      hi = mid;
    }
    // Spread of the weights inside the bracket as it stood before the update.
    if (max_within_hi - min_above_lo < config.epsilon || out.iterations >= config.max_iters) {
      break;
    }
  }

  // Snap l to the smallest weight above it when that weight alone already
  // reaches p; otherwise weights equal to l are needed and l stays.
  double mass_above_lo = 0.0;
  double min_above_lo = kInf;
  for (double x : w) {
    if (x > lo) {
      mass_above_lo += x;
      if (x < min_above_lo) min_above_lo = x;
    }
  }
  double threshold = lo;
  if (min_above_lo < kInf && reaches(mass_above_lo, config.p)) threshold = min_above_lo;

  std::vector<std::size_t> chosen;
  for (std::size_t i = 0; i < n; ++i) {
    if (w[i] >= threshold && w[i] > 0.0) chosen.push_back(i);
  }
  out.selection = TokenSelection::from_indices(n, std::move(chosen));
  out.selection.measure(weights);
  out.threshold = threshold;
  return out;
}

PruneOutcome prune_restricted(const AttentionWeights& candidate_weights,
                              const TokenSelection& candidates,
                              const BinarySearchConfig& config) {
  if (candidates.empty()) throw InvalidArgument("prune: empty candidate set");
  if (candidate_weights.size() != candidates.size()) {
    throw DimensionError("prune: candidate weights and candidate set differ in length");
  }
  auto local = binary_search_top_p(candidate_weights, config);

  const auto ids = candidates.indices();
  std::vector<std::size_t> global;
  global.reserve(local.selection.size());
  for (std::size_t j : local.selection.indices()) global.push_back(ids[j]);

  PruneOutcome out;
  out.selection = TokenSelection::from_indices(candidates.context_length(), std::move(global));
  // Mass is reported in the candidate-local (renormalized) frame.
  std::vector<double> full(candidates.context_length(), 0.0);
  for (std::size_t j = 0; j < ids.size(); ++j) full[ids[j]] = candidate_weights[j];
  out.selection.measure(AttentionWeights::normalize(std::move(full)));
  out.threshold = local.threshold;
  out.iterations = local.iterations;
  return out;
}

PruneOutcome prune(const AttentionWeights& estimate, const TokenSelection& candidates,
                   const BinarySearchConfig& config) {
  if (candidates.empty()) throw InvalidArgument("prune: empty candidate set");
  if (estimate.size() != candidates.context_length()) {
    throw DimensionError("prune: estimate length differs from candidate context length");
  }
  return prune_restricted(estimate.restrict_to(candidates.indices()), candidates, config);
}

}  // namespace topp
