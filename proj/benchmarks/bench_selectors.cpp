// SPDX-License-Identifier: Apache-2.0

// Candidate selectors at a quarter-context budget.

#include <benchmark/benchmark.h>

#include <random>

#include "topp/quant_cache.hpp"
#include "topp/selectors.hpp"

namespace {

constexpr std::size_t kDim = 128;

struct Fixture {
  explicit Fixture(std::size_t n) : keys(n, kDim), q(kDim) {
    std::mt19937_64 rng(n);
    std::normal_distribution<float> g;
    for (float& x : keys.flat()) x = g(rng);
    for (float& x : q) x = g(rng);
    metadata = topp::build_page_metadata(keys, 16);
    channels = topp::build_channel_index(keys, kDim / 8);
  }
  topp::Matrix<float> keys;
  std::vector<float> q;
  std::vector<topp::PageMetadata> metadata;
  topp::ChannelIndex channels;
};

void BM_Quest(benchmark::State& state) {
  const Fixture f(static_cast<std::size_t>(state.range(0)));
  const std::size_t budget = f.keys.rows() / 4;
  for (auto _ : state) benchmark::DoNotOptimize(topp::select_quest(f.q, f.metadata, budget, 16));
}

void BM_ChannelPruned(benchmark::State& state) {
  const Fixture f(static_cast<std::size_t>(state.range(0)));
  const std::size_t budget = f.keys.rows() / 4;
  for (auto _ : state) {
    benchmark::DoNotOptimize(topp::select_channel_pruned(f.q, f.channels, budget));
  }
}

void BM_SinkWindow(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(topp::select_sink_window(n, 4, n / 4));
}

}  // namespace

BENCHMARK(BM_Quest)->Arg(4096)->Arg(32768);
BENCHMARK(BM_ChannelPruned)->Arg(4096)->Arg(32768);
BENCHMARK(BM_SinkWindow)->Arg(4096)->Arg(32768);

BENCHMARK_MAIN();
