// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <vector>

#include "topp/errors.hpp"
#include "topp/stats.hpp"
#include "topp/tensor_io.hpp"
#include "topp/workload.hpp"

namespace topp {
namespace {

WorkloadSpec tempered(std::size_t n, double temperature, std::uint64_t seed) {
  WorkloadSpec spec;
  spec.kind = WorkloadKind::logit_temperature;
  spec.n = n;
  spec.d = 16;
  spec.temperature = temperature;
  spec.seed = seed;
  return spec;
}

double head_entropy(const WorkloadItem& item, std::size_t head = 0) {
  const auto& p = item.problem;
  const std::size_t kv = head / (p.heads() / p.kv_heads());
  return entropy(attention_weights<float>(p.queries.row(head), p.keys[kv]));
}

TEST(Workload, Names) {
  for (auto k : {WorkloadKind::gaussian_qk, WorkloadKind::logit_temperature, WorkloadKind::file}) {
    EXPECT_EQ(workload_kind_from_string(to_string(k)), k);
  }
  EXPECT_THROW((void)workload_kind_from_string("real"), ConfigError);
}

TEST(Workload, Validation) {
  WorkloadSpec spec;
  spec.n = 0;
  EXPECT_THROW(spec.validate(), InvalidArgument);
  spec = {};
  spec.heads = 6;
  spec.group_size = 4;
  EXPECT_THROW(spec.validate(), InvalidArgument);
  spec = {};
  spec.temperature = 0.0;
  EXPECT_THROW(spec.validate(), InvalidArgument);
  spec = {};
  spec.heads = 2;
  spec.head_temperatures = {1.0};
  EXPECT_THROW(spec.validate(), InvalidArgument);
  spec = {};
  spec.kind = WorkloadKind::file;
  EXPECT_THROW(spec.validate(), InvalidArgument);
}

TEST(Workload, ShapesAndOrdering) {
  WorkloadSpec spec;
  spec.n = 40;
  spec.d = 8;
  spec.heads = 4;
  spec.group_size = 2;
  spec.prompts = 2;
  spec.count = 3;
  spec.layers = 2;
  const auto items = generate_workload(spec);
  ASSERT_EQ(items.size(), 12u);
  EXPECT_EQ(items[1].layer, 1u);
  EXPECT_EQ(items[2].step, 1u);
  EXPECT_EQ(items[6].prompt, 1u);
  for (const auto& item : items) {
    EXPECT_EQ(item.problem.heads(), 4u);
    EXPECT_EQ(item.problem.kv_heads(), 2u);
    EXPECT_EQ(item.problem.keys[1].rows(), 40u);
  }
}

TEST(Workload, SameSeedSameTensors) {
  for (auto kind : {WorkloadKind::gaussian_qk, WorkloadKind::logit_temperature}) {
    auto spec = tempered(64, 0.7, 42);
    spec.kind = kind;
    spec.heads = 2;
    spec.group_size = 2;
    const auto a = generate_item(spec, 1, 2, 3);
    const auto b = generate_item(spec, 1, 2, 3);
    EXPECT_EQ(a.problem.queries, b.problem.queries);
    EXPECT_EQ(a.problem.keys, b.problem.keys);
    EXPECT_EQ(a.problem.values, b.problem.values);
    const auto c = generate_item(spec, 1, 2, 4);
    EXPECT_NE(a.problem.keys, c.problem.keys);
  }
}

TEST(Workload, KeysReproduceTargetLogits) {
  std::mt19937_64 rng(181);
  std::normal_distribution<double> g;
  std::vector<float> q(32);
  for (float& x : q) x = static_cast<float>(g(rng));
  std::vector<double> logits(100);
  for (double& z : logits) z = 3.0 * g(rng);
  const auto k = keys_for_logits(q, logits, rng);
  const auto got = attention_logits<float>(q, k);
  for (std::size_t i = 0; i < 100; ++i) EXPECT_NEAR(got[i], logits[i], 1e-3);
  EXPECT_THROW((void)keys_for_logits(std::vector<float>(4, 0.0f), logits, rng), InvalidArgument);
}

TEST(Workload, HighTemperatureIsNearlyUniform) {
  const auto item = generate_item(tempered(2048, 1e6, 3), 0, 0, 0);
  EXPECT_NEAR(head_entropy(item), std::log(2048.0), 0.01 * std::log(2048.0));
}

TEST(Workload, TemperatureOrdersEntropy) {
  double sharp = 0.0, flat = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    sharp += head_entropy(generate_item(tempered(4096, 0.5, seed), 0, 0, 0));
    flat += head_entropy(generate_item(tempered(4096, 4.0, seed), 0, 0, 0));
  }
  EXPECT_GT(flat / 100.0 - sharp / 100.0, 1.0);
}

TEST(Workload, HeadTemperaturesShapeGroupMembers) {
  auto spec = tempered(2048, 1.0, 9);
  spec.heads = 4;
  spec.group_size = 4;
  spec.head_temperatures = {1.0, 0.25, 1.0, 8.0};
  const auto item = generate_item(spec, 0, 0, 0);
  EXPECT_LT(head_entropy(item, 1), head_entropy(item, 0));
  EXPECT_GT(head_entropy(item, 3), head_entropy(item, 0));
}

TEST(Workload, RandomWeightsTemperature) {
  std::mt19937_64 rng(191);
  const auto w = random_weights(1000, 1e6, rng);
  EXPECT_NEAR(entropy(w), std::log(1000.0), 1e-3);
}

TEST(Workload, FileKindReadsTensors) {
  const auto dir = std::filesystem::temp_directory_path() / "topp_workload_file";
  std::filesystem::create_directories(dir);
  WorkloadSpec gen;
  gen.n = 20;
  gen.d = 4;
  gen.heads = 2;
  gen.group_size = 2;
  const auto ref = generate_item(gen, 0, 0, 0).problem;
  write_tensor(dir / "q.bin", to_tensor(ref.queries));
  write_tensor(dir / "k.bin", to_tensor(ref.keys[0]));
  Tensor v{{1, 20, 4}, std::vector<float>(ref.values[0].flat().begin(), ref.values[0].flat().end())};
  write_tensor(dir / "v.bin", v);

  WorkloadSpec spec;
  spec.kind = WorkloadKind::file;
  spec.q_path = dir / "q.bin";
  spec.k_path = dir / "k.bin";
  spec.v_path = dir / "v.bin";
  const auto items = generate_workload(spec);
  ASSERT_EQ(items.size(), 1u);
  EXPECT_EQ(items[0].problem.queries, ref.queries);
  EXPECT_EQ(items[0].problem.keys, ref.keys);
  EXPECT_EQ(items[0].problem.values, ref.values);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace topp
