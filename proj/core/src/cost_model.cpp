// SPDX-License-Identifier: Apache-2.0

#include "topp/cost_model.hpp"

#include <string>

#include "topp/errors.hpp"

namespace topp {
namespace {

double to_double(const Fraction& f) {
  return static_cast<double>(f.numerator()) / static_cast<double>(f.denominator());
}

void check_budgets(double n, double b0, double b1) {
  if (!(n >= 1.0)) throw InvalidArgument("cost model: context length must be >= 1");
  if (!(0.0 <= b1 && b1 <= b0 && b0 <= n)) {
    throw InvalidArgument("cost model: requires 0 <= B1 <= B0 <= N");
  }
}

}  // namespace

Fraction model_speedup_exact(std::int64_t n, std::int64_t b0, std::int64_t b1,
                             const CostFractions& costs) {
  check_budgets(static_cast<double>(n), static_cast<double>(b0), static_cast<double>(b1));
  const Fraction selector = costs.selector * n;
  const Fraction numerator = selector + b0;
  const Fraction denominator = selector + costs.estimator * b0 + b1;
  if (denominator.numerator() == 0) throw InvalidArgument("cost model: zero denominator");
  return numerator / denominator;
}

double model_speedup(double n, double b0, double b1, double selector_fraction,
                     double estimator_fraction) {
  check_budgets(n, b0, b1);
  const double denominator = n * selector_fraction + b0 * estimator_fraction + b1;
  if (!(denominator > 0.0)) throw InvalidArgument("cost model: zero denominator");
  return (n * selector_fraction + b0) / denominator;
}

Fraction memory_overhead(QuantBits bits) { return Fraction(bit_count(bits), 16) / 2; }

Fraction memory_overhead(int bits) { return memory_overhead(quant_bits_from_int(bits)); }

Fraction estimator_cost(QuantBits bits) { return Fraction(bit_count(bits), 16); }

ModeledCost charge(const TokenLoads& loads, const CostFractions& costs, double row_bytes) {
  ModeledCost c;
  c.selector_units = to_double(costs.selector) * static_cast<double>(loads.selector);
  c.estimator_units = to_double(costs.estimator) * static_cast<double>(loads.estimator);
  c.attention_units = static_cast<double>(loads.attention);
  c.total_units = c.selector_units + c.estimator_units + c.attention_units;
  c.baseline_units = c.selector_units + static_cast<double>(loads.estimator);
  c.speedup = c.total_units > 0.0 ? c.baseline_units / c.total_units : 1.0;
  c.bytes = c.total_units * row_bytes;
  return c;
}

}  // namespace topp
