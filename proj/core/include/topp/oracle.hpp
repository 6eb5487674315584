// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "topp/attention.hpp"

namespace topp {

/// Token positions ordered by descending weight, ties broken by lower index.
[[nodiscard]] std::vector<std::size_t> descending_order(const AttentionWeights& weights);

/// The `budget` heaviest tokens. Throws InvalidArgument when budget > n.
[[nodiscard]] TokenSelection oracle_top_k(const AttentionWeights& weights, std::size_t budget);

/// Smallest token set whose mass reaches p, built by descending-sort
/// accumulation. Zero-weight tokens are never taken.
[[nodiscard]] TokenSelection oracle_top_p(const AttentionWeights& weights, double p);

struct BudgetPoint {
  double p = 0.0;
  std::size_t budget = 0;
  double attained_mass = 0.0;

  friend bool operator==(const BudgetPoint&, const BudgetPoint&) = default;
};

/// Top-p budget for every threshold of an ascending grid, from a single sort.
[[nodiscard]] std::vector<BudgetPoint> budget_curve(const AttentionWeights& weights,
                                                    std::span<const double> p_grid);

/// Throws InvalidArgument unless 0 <= p <= 1.
void validate_threshold(double p);

}  // namespace topp
