// SPDX-License-Identifier: Apache-2.0

// Threshold search against the sort-and-scan reference.

#include <benchmark/benchmark.h>

#include <random>

#include "topp/oracle.hpp"
#include "topp/pruner.hpp"
#include "topp/workload.hpp"

namespace {

topp::AttentionWeights weights_for(const benchmark::State& state) {
  std::mt19937_64 rng(static_cast<std::uint64_t>(state.range(0)));
  return topp::random_weights(static_cast<std::size_t>(state.range(0)), 1.0, rng);
}

void BM_BinarySearch(benchmark::State& state) {
  const auto w = weights_for(state);
  topp::BinarySearchConfig cfg;
  cfg.p = 0.9;
  for (auto _ : state) benchmark::DoNotOptimize(topp::binary_search_top_p(w, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_SortOracle(benchmark::State& state) {
  const auto w = weights_for(state);
  for (auto _ : state) benchmark::DoNotOptimize(topp::oracle_top_p(w, 0.9));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_BinarySearch)->RangeMultiplier(4)->Range(1 << 10, 1 << 18);
BENCHMARK(BM_SortOracle)->RangeMultiplier(4)->Range(1 << 10, 1 << 18);
