// SPDX-License-Identifier: Apache-2.0

#include "topp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/statistics/bivariate_statistics.hpp>
#include <boost/math/statistics/univariate_statistics.hpp>

namespace topp {

double entropy(const AttentionWeights& weights) {
  double h = 0.0;
  for (double w : weights.values()) {
    if (w > 0.0) h -= w * std::log(w);
  }
  return h;
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("spearman: length mismatch");
  if (x.size() < 2) return 0.0;
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const bool flat_x = std::all_of(rx.begin(), rx.end(), [&](double r) { return r == rx[0]; });
  const bool flat_y = std::all_of(ry.begin(), ry.end(), [&](double r) { return r == ry[0]; });
  if (flat_x || flat_y) return 0.0;
  return boost::math::statistics::correlation_coefficient(rx, ry);
}

Summary summarize(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("summarize: no values");
  Summary s;
  s.count = values.size();
  const auto [mean, variance] = boost::math::statistics::mean_and_sample_variance(values);
  s.mean = mean;
  // Population variance from the sample variance.
  const double n = static_cast<double>(values.size());
  s.stddev = values.size() > 1 ? std::sqrt(std::max(0.0, variance * (n - 1.0) / n)) : 0.0;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  s.min = *lo;
  s.max = *hi;
  return s;
}

}  // namespace topp
