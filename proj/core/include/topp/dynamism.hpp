// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "topp/stats.hpp"

namespace topp {

/// Where a budget sample came from.
struct BudgetTag {
  std::size_t prompt = 0;
  std::size_t step = 0;
  std::size_t layer = 0;
  std::size_t head = 0;

  friend auto operator<=>(const BudgetTag&, const BudgetTag&) = default;
};

struct BudgetSample {
  BudgetTag tag;
  double budget = 0.0;
};

struct Histogram {
  std::vector<double> edges;        ///< ascending; bin i is [edges[i], edges[i+1])
  std::vector<std::size_t> counts;  ///< edges.size() - 1 entries; the last bin is closed
};

/// Edges 0, 1, 2, 4, ... up to the first power of two above `max_value`.
[[nodiscard]] std::vector<double> power_of_two_edges(double max_value);

[[nodiscard]] Histogram make_histogram(std::span<const double> values, std::vector<double> edges);

/// Budget variation along one axis. Each key (e.g. one head id) contributes the
/// mean budget of its samples; `across_keys` summarizes those means.
struct AxisStats {
  std::string axis;
  std::map<std::size_t, Summary> per_key;
  Summary across_keys;
  Histogram histogram;  ///< histogram of the per-key means
};

struct DynamismStats {
  Summary overall;
  Histogram overall_histogram;
  AxisStats prompt;
  AxisStats step;
  AxisStats layer;
  AxisStats head;
};

/// Single-consumer accumulator; samples may arrive in any order.
class DynamismCollector {
 public:
  /// Throws InvalidArgument if the same tag was already added.
  void add(const BudgetSample& sample);
  [[nodiscard]] std::size_t size() const noexcept { return samples_.size(); }
  /// Throws InvalidArgument when nothing was added.
  [[nodiscard]] DynamismStats finish() const;

 private:
  std::map<BudgetTag, double> samples_;
};

[[nodiscard]] DynamismStats collect_dynamism(std::span<const BudgetSample> samples);

}  // namespace topp
