// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>

#include <boost/rational.hpp>

#include "topp/quant_cache.hpp"

namespace topp {

using Fraction = boost::rational<std::int64_t>;

/// Load cost per token, in units of one full-precision (16-bit) key/value row.
struct CostFractions {
  Fraction selector{1, 16};  ///< selector estimation, charged over all N tokens
  Fraction estimator{1, 4};  ///< quantized estimation, charged per candidate (INT4)
};

/// (N*s + B0) / (N*s + B0*e + B1), the select-then-prune speedup over running
/// the selector alone. Requires 0 <= B1 <= B0 <= N and N >= 1.
[[nodiscard]] Fraction model_speedup_exact(std::int64_t n, std::int64_t b0, std::int64_t b1,
                                           const CostFractions& costs = {});

[[nodiscard]] double model_speedup(double n, double b0, double b1,
                                   double selector_fraction = 1.0 / 16.0,
                                   double estimator_fraction = 0.25);

/// Extra memory of a key-only quantized cache relative to a 16-bit K+V cache:
/// (bits / 16) * 1/2.
[[nodiscard]] Fraction memory_overhead(QuantBits bits);
/// Same, for an integer width. Throws InvalidArgument unless bits is 2, 4 or 8.
[[nodiscard]] Fraction memory_overhead(int bits);

/// Per-candidate estimator cost for a code width (bits / 16).
[[nodiscard]] Fraction estimator_cost(QuantBits bits);

/// Token loads counted while running one head.
struct TokenLoads {
  std::size_t selector = 0;   ///< tokens the selector scored (N)
  std::size_t estimator = 0;  ///< candidates scored by the estimator (B0)
  std::size_t attention = 0;  ///< tokens attended by the final kernel (B1)
};

struct ModeledCost {
  double selector_units = 0.0;
  double estimator_units = 0.0;
  double attention_units = 0.0;
  double total_units = 0.0;
  /// Selector plus attention over every candidate (no pruning stage).
  double baseline_units = 0.0;
  double speedup = 1.0;
  double bytes = 0.0;  ///< total_units * row_bytes
};

/// Charges counted loads under `costs`. `row_bytes` converts units to bytes
/// (2 * head_dim for a 16-bit row).
[[nodiscard]] ModeledCost charge(const TokenLoads& loads, const CostFractions& costs,
                                 double row_bytes);

}  // namespace topp
