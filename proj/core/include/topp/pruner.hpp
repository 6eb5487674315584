// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

#include "topp/attention.hpp"

namespace topp {

/// Parameters of the bisection top-p search.
struct BinarySearchConfig {
  double p = 0.9;
  /// Bracket resolution: the search stops once every weight still inside the
  /// bracket (l, r] lies within `epsilon` of each other.
  double epsilon = 1e-15;
  int max_iters = 64;

  /// Throws InvalidArgument on p outside [0,1], epsilon <= 0 or max_iters < 1.
  void validate() const;
};

struct PruneOutcome {
  /// Selected tokens, measured against the weights the search ran on.
  TokenSelection selection;
  /// Every selected weight is >= threshold. +inf for an empty selection.
  double threshold = 0.0;
  int iterations = 0;
};

/// Bisection top-p over a normalized weight vector.
///
/// Maintains a bracket [l, r] with mass(w >= l) >= p and, once r has moved,
/// mass(w >= r) < p. Each iteration makes one fused pass that computes the
/// mass at the midpoint together with the smallest weight above l and the
/// largest weight at or below r. When those two agree (one distinct value left
/// in the bracket) the threshold is exact; ties at the threshold are all kept.
///
/// Throws InvalidArgument when `weights` is not normalized to within 1e-4.
[[nodiscard]] PruneOutcome binary_search_top_p(const AttentionWeights& weights,
                                               const BinarySearchConfig& config);

/// Restricts a full-context weight estimate to `candidates`, renormalizes and
/// runs binary_search_top_p. The outcome's selection is expressed in global
/// token positions and measured against the renormalized restriction.
[[nodiscard]] PruneOutcome prune(const AttentionWeights& estimate, const TokenSelection& candidates,
                                 const BinarySearchConfig& config);

/// Same as prune() for weights that are already restricted to (and normalized
/// over) the candidate positions, in candidate order.
[[nodiscard]] PruneOutcome prune_restricted(const AttentionWeights& candidate_weights,
                                            const TokenSelection& candidates,
                                            const BinarySearchConfig& config);

}  // namespace topp
