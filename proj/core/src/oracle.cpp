// SPDX-License-Identifier: Apache-2.0

#include "topp/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace topp {

void validate_threshold(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw InvalidArgument("threshold p must lie in [0, 1], got " + std::to_string(p));
  }
}

std::vector<std::size_t> descending_order(const AttentionWeights& weights) {
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return weights[a] > weights[b]; });
  return order;
}

TokenSelection oracle_top_k(const AttentionWeights& weights, std::size_t budget) {
  const std::size_t n = weights.size();
  if (budget > n) {
    throw InvalidArgument("oracle_top_k: budget " + std::to_string(budget) + " exceeds n=" +
                          std::to_string(n));
  }
  auto order = descending_order(weights);
  order.resize(budget);
  auto sel = TokenSelection::from_indices(n, std::move(order));
  sel.measure(weights);
  return sel;
}

namespace {

// Number of leading entries of `order` needed to reach p.
std::size_t prefix_reaching(const AttentionWeights& weights, std::span<const std::size_t> order,
                            double p, std::size_t start, double& cumulative) {
  std::size_t count = start;
  while (!reaches(cumulative, p) && count < order.size() && weights[order[count]] > 0.0) {
    cumulative += weights[order[count]];
    ++count;
  }
  return count;
}

}  // namespace

TokenSelection oracle_top_p(const AttentionWeights& weights, double p) {
  validate_threshold(p);
  auto order = descending_order(weights);
  double cumulative = 0.0;
  const std::size_t count = prefix_reaching(weights, order, p, 0, cumulative);
  order.resize(count);
  auto sel = TokenSelection::from_indices(weights.size(), std::move(order));
  sel.measure(weights);
  return sel;
}

std::vector<BudgetPoint> budget_curve(const AttentionWeights& weights,
                                      std::span<const double> p_grid) {
  for (double p : p_grid) validate_threshold(p);
  if (!std::is_sorted(p_grid.begin(), p_grid.end())) {
    throw InvalidArgument("budget_curve: p grid must be sorted ascending");
  }
  const auto order = descending_order(weights);
  std::vector<BudgetPoint> curve;
  curve.reserve(p_grid.size());
  double cumulative = 0.0;
  std::size_t count = 0;
  for (double p : p_grid) {
    count = prefix_reaching(weights, order, p, count, cumulative);
    curve.push_back({p, count, std::min(cumulative, 1.0)});
  }
  return curve;
}

}  // namespace topp
