// SPDX-License-Identifier: Apache-2.0

#include "topp/dynamism.hpp"

#include <algorithm>
#include <cmath>

namespace topp {

std::vector<double> power_of_two_edges(double max_value) {
  std::vector<double> edges{0.0, 1.0};
  while (edges.back() <= max_value) edges.push_back(edges.back() * 2.0);
  return edges;
}

Histogram make_histogram(std::span<const double> values, std::vector<double> edges) {
  if (edges.size() < 2 || !std::is_sorted(edges.begin(), edges.end())) {
    throw InvalidArgument("make_histogram: need at least two ascending edges");
  }
  Histogram h;
  h.counts.assign(edges.size() - 1, 0);
  for (double v : values) {
    if (v < edges.front() || v > edges.back()) continue;
    auto it = std::upper_bound(edges.begin(), edges.end(), v);
    std::size_t bin = static_cast<std::size_t>(it - edges.begin());
    bin = bin == 0 ? 0 : bin - 1;
    bin = std::min(bin, h.counts.size() - 1);
    ++h.counts[bin];
  }
  h.edges = std::move(edges);
  return h;
}

void DynamismCollector::add(const BudgetSample& sample) {
  if (!std::isfinite(sample.budget) || sample.budget < 0.0) {
    throw InvalidArgument("dynamism: budget must be finite and non-negative");
  }
  if (!samples_.emplace(sample.tag, sample.budget).second) {
    throw InvalidArgument("dynamism: duplicate tag (prompt " + std::to_string(sample.tag.prompt) +
                          ", step " + std::to_string(sample.tag.step) + ", layer " +
                          std::to_string(sample.tag.layer) + ", head " +
                          std::to_string(sample.tag.head) + ")");
  }
}

namespace {

template <typename KeyFn>
AxisStats axis_stats(const std::map<BudgetTag, double>& samples, std::string name, KeyFn key,
                     const std::vector<double>& edges) {
  std::map<std::size_t, std::vector<double>> grouped;
  for (const auto& [tag, budget] : samples) grouped[key(tag)].push_back(budget);

  AxisStats axis;
  axis.axis = std::move(name);
  std::vector<double> means;
  for (const auto& [k, values] : grouped) {
    const Summary s = summarize(values);
    axis.per_key.emplace(k, s);
    means.push_back(s.mean);
  }
  axis.across_keys = summarize(means);
  axis.histogram = make_histogram(means, edges);
  return axis;
}

}  // namespace

DynamismStats DynamismCollector::finish() const {
  if (samples_.empty()) throw InvalidArgument("dynamism: no samples");
  std::vector<double> all;
  all.reserve(samples_.size());
  for (const auto& [tag, budget] : samples_) all.push_back(budget);

  DynamismStats stats;
  stats.overall = summarize(all);
  const auto edges = power_of_two_edges(stats.overall.max);
  stats.overall_histogram = make_histogram(all, edges);
  stats.prompt = axis_stats(samples_, "prompt", [](const BudgetTag& t) { return t.prompt; }, edges);
  stats.step = axis_stats(samples_, "step", [](const BudgetTag& t) { return t.step; }, edges);
  stats.layer = axis_stats(samples_, "layer", [](const BudgetTag& t) { return t.layer; }, edges);
  stats.head = axis_stats(samples_, "head", [](const BudgetTag& t) { return t.head; }, edges);
  return stats;
}

DynamismStats collect_dynamism(std::span<const BudgetSample> samples) {
  DynamismCollector collector;
  for (const auto& s : samples) collector.add(s);
  return collector.finish();
}

}  // namespace topp
