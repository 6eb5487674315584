// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "topp/attention.hpp"

namespace topp {

/// Shannon entropy in nats.
[[nodiscard]] double entropy(const AttentionWeights& weights);

/// Ranks starting at 1; tied values share their average rank.
[[nodiscard]] std::vector<double> average_ranks(std::span<const double> values);

/// Spearman rank correlation. Returns 0 when either side is constant.
[[nodiscard]] double spearman(std::span<const double> x, std::span<const double> y);

struct Summary {
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;  ///< population standard deviation
  double min = 0.0;
  double max = 0.0;
};

/// Throws InvalidArgument on an empty input.
[[nodiscard]] Summary summarize(std::span<const double> values);

}  // namespace topp
