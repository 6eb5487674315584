// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "oracles.hpp"
#include "topp/errors.hpp"
#include "topp/oracle.hpp"
#include "topp/pruner.hpp"

namespace topp {
namespace {

BinarySearchConfig at(double p) {
  BinarySearchConfig cfg;
  cfg.p = p;
  return cfg;
}

TEST(BinarySearch, SingleToken) {
  const AttentionWeights w({1.0});
  for (double p : {0.01, 0.5, 1.0}) {
    const auto out = binary_search_top_p(w, at(p));
    EXPECT_EQ(out.selection.size(), 1u);
    EXPECT_LE(out.iterations, 1);
  }
}

TEST(BinarySearch, FullMassTakesEveryNonzeroToken) {
  const AttentionWeights w({0.2, 0.0, 0.5, 0.3, 0.0});
  const auto out = binary_search_top_p(w, at(1.0));
  EXPECT_EQ(out.selection, TokenSelection::from_indices(5, {0, 2, 3}));
  EXPECT_NEAR(out.selection.attained_mass(), 1.0, 1e-12);
}

TEST(BinarySearch, ZeroThresholdIsEmpty) {
  const AttentionWeights w({0.2, 0.8});
  const auto out = binary_search_top_p(w, at(0.0));
  EXPECT_TRUE(out.selection.empty());
  EXPECT_TRUE(std::isinf(out.threshold));
}

TEST(BinarySearch, TiesAtThresholdAreAllKept) {
  const AttentionWeights w({0.4, 0.2, 0.2, 0.2});
  const auto out = binary_search_top_p(w, at(0.5));
  EXPECT_EQ(out.selection.size(), 4u);
  EXPECT_EQ(oracle_top_p(w, 0.5).size(), 2u);
  EXPECT_DOUBLE_EQ(out.threshold, 0.2);
}

TEST(BinarySearch, ValidatesInput) {
  const AttentionWeights w({0.5, 0.5});
  EXPECT_THROW((void)binary_search_top_p(w, at(1.2)), InvalidArgument);
  BinarySearchConfig bad;
  bad.epsilon = 0.0;
  EXPECT_THROW((void)binary_search_top_p(w, bad), InvalidArgument);
  bad = {};
  bad.max_iters = 0;
  EXPECT_THROW((void)binary_search_top_p(w, bad), InvalidArgument);
}

TEST(BinarySearch, IterationCapIsHonoured) {
  std::mt19937_64 rng(3);
  const auto w = testing::as_weights(testing::peaked_weights(512, 1.0, rng));
  BinarySearchConfig cfg = at(0.9);
  cfg.max_iters = 5;
  const auto out = binary_search_top_p(w, cfg);
  EXPECT_LE(out.iterations, 5);
  EXPECT_TRUE(reaches(out.selection.attained_mass(), 0.9));
}

TEST(BinarySearch, MatchesOracleOnDistinctWeights) {
  std::mt19937_64 rng(41);
  const std::size_t sizes[] = {16, 64, 256, 1024, 4096};
  for (int rep = 0; rep < 250; ++rep) {
    const std::size_t n = sizes[rep % 5];
    const double temperature = std::array{0.25, 0.5, 1.0, 2.0, 4.0}[(rep / 5) % 5];
    const auto w = testing::as_weights(testing::peaked_weights(n, temperature, rng));
    std::vector<double> sorted(w.values().begin(), w.values().end());
    std::sort(sorted.begin(), sorted.end());
    const bool distinct = std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end();
    for (double p : {0.5, 0.8, 0.85, 0.9, 0.95, 0.99}) {
      const auto out = binary_search_top_p(w, at(p));
      EXPECT_TRUE(reaches(out.selection.attained_mass(), p));
      EXPECT_LE(out.iterations, 64);
      const std::size_t expected = testing::sorted_top_p_size(w.values(), p);
      if (distinct) {
        EXPECT_EQ(out.selection.size(), expected) << "n=" << n << " p=" << p;
      } else {
        EXPECT_GE(out.selection.size(), expected);
      }
      for (std::size_t i : out.selection.indices()) EXPECT_GE(w[i], out.threshold);
    }
  }
}

TEST(BinarySearch, TieExcessIsOnlyAtThreshold) {
  std::mt19937_64 rng(43);
  std::uniform_int_distribution<int> levels(0, 6);
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t n = 4 + rep % 200;
    std::vector<double> raw(n);
    for (double& x : raw) x = std::exp2(levels(rng));
    const auto w = AttentionWeights::normalize(raw);
    for (double p : {0.3, 0.5, 0.8, 0.9, 0.99}) {
      const auto out = binary_search_top_p(w, at(p));
      const auto ref = oracle_top_p(w, p);
      ASSERT_TRUE(reaches(out.selection.attained_mass(), p));
      ASSERT_TRUE(ref.is_subset_of(out.selection));
      double lightest = 1.0;
      for (std::size_t i : out.selection.indices()) lightest = std::min(lightest, w[i]);
      for (std::size_t i : out.selection.indices()) {
        if (!ref.contains(i)) {
          EXPECT_EQ(w[i], lightest);
        }
      }
    }
  }
}

TEST(BinarySearch, ThresholdIsTight) {
  std::mt19937_64 rng(47);
  for (int rep = 0; rep < 100; ++rep) {
    const auto w = testing::as_weights(testing::peaked_weights(100 + rep, 0.7, rng));
    for (double p : {0.5, 0.9, 0.99}) {
      const auto out = binary_search_top_p(w, at(p));
      std::set<double> values(w.values().begin(), w.values().end());
      auto next = values.upper_bound(out.threshold);
      double mass_at = 0.0;
      for (double x : w.values()) mass_at += x >= out.threshold ? x : 0.0;
      EXPECT_TRUE(reaches(mass_at, p));
      if (next != values.end() && out.selection.size() < w.size()) {
        double mass_next = 0.0;
        for (double x : w.values()) mass_next += x >= *next ? x : 0.0;
        EXPECT_FALSE(reaches(mass_next, p));
      }
    }
  }
}

TEST(BinarySearch, Deterministic) {
  std::mt19937_64 rng(53);
  const auto w = testing::as_weights(testing::peaked_weights(777, 1.3, rng));
  const auto a = binary_search_top_p(w, at(0.87));
  const auto b = binary_search_top_p(w, at(0.87));
  EXPECT_EQ(a.selection, b.selection);
  EXPECT_EQ(a.threshold, b.threshold);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(Prune, AllCandidatesFullMass) {
  const AttentionWeights w({0.3, 0.0, 0.7});
  const auto out = prune(w, TokenSelection::all(3), at(1.0));
  EXPECT_EQ(out.selection, TokenSelection::from_indices(3, {0, 2}));
}

TEST(Prune, SingleCandidateIsForced) {
  const AttentionWeights w({0.3, 0.1, 0.6});
  const auto out = prune(w, TokenSelection::from_indices(3, {1}), at(0.9));
  EXPECT_EQ(out.selection, TokenSelection::from_indices(3, {1}));
  EXPECT_NEAR(out.selection.attained_mass(), 1.0, 1e-12);
}

TEST(Prune, EmptyCandidatesRejected) {
  const AttentionWeights w({0.5, 0.5});
  EXPECT_THROW((void)prune(w, TokenSelection::none(2), at(0.9)), InvalidArgument);
}

TEST(Prune, MatchesOracleOnRenormalizedRestriction) {
  std::mt19937_64 rng(59);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 64 + 8 * rep;
    const auto w = testing::as_weights(testing::peaked_weights(n, 1.0, rng));
    const auto candidates = oracle_top_k(w, n / 4);
    const auto out = prune(w, candidates, at(0.9));
    const auto restricted = w.restrict_to(candidates.indices());
    const auto local = oracle_top_p(restricted, 0.9);
    std::vector<std::size_t> expected;
    for (std::size_t j : local.indices()) expected.push_back(candidates.indices()[j]);
    EXPECT_EQ(out.selection, TokenSelection::from_indices(n, expected));
    EXPECT_TRUE(out.selection.is_subset_of(candidates));
    EXPECT_LE(out.selection.size(), candidates.size());
    EXPECT_TRUE(reaches(out.selection.attained_mass(), 0.9));
  }
}

}  // namespace
}  // namespace topp
