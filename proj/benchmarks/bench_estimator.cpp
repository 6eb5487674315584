// SPDX-License-Identifier: Apache-2.0

// Quantized score estimation by code width.

#include <benchmark/benchmark.h>

#include <random>

#include "topp/quant_cache.hpp"

namespace {

constexpr std::size_t kDim = 128;

void BM_EstimateScores(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto bits = topp::quant_bits_from_int(static_cast<int>(state.range(1)));
  std::mt19937_64 rng(7);
  std::normal_distribution<float> g;
  topp::Matrix<float> keys(n, kDim);
  for (float& x : keys.flat()) x = g(rng);
  std::vector<float> q(kDim);
  for (float& x : q) x = g(rng);
  const auto built = topp::build_cache(keys, 16, bits);
  const auto all = topp::TokenSelection::all(n);
  std::size_t bytes = 0;
  for (auto _ : state) {
    auto est = topp::estimate_scores(q, built.cache, all);
    bytes = est.bytes_touched;
    benchmark::DoNotOptimize(est);
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * bytes));
}

void BM_QuantizeRow(benchmark::State& state) {
  const auto bits = topp::quant_bits_from_int(static_cast<int>(state.range(0)));
  std::mt19937_64 rng(11);
  std::normal_distribution<float> g;
  std::vector<float> row(kDim);
  for (float& x : row) x = g(rng);
  for (auto _ : state) benchmark::DoNotOptimize(topp::quantize_row(row, bits));
}

}  // namespace

BENCHMARK(BM_EstimateScores)->ArgsProduct({{4096, 32768}, {2, 4, 8}});
BENCHMARK(BM_QuantizeRow)->Arg(2)->Arg(4)->Arg(8);
