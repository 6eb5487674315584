// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "topp/config.hpp"
#include "topp/errors.hpp"

namespace topp {
namespace {

TEST(Config, EmptyDocumentUsesDefaults) {
  const auto cfg = parse_config("{}");
  EXPECT_EQ(cfg.workload.kind, WorkloadKind::gaussian_qk);
  EXPECT_EQ(cfg.pipeline.selector.kind, SelectorKind::quest);
  EXPECT_EQ(cfg.pipeline.estimator, EstimatorMode::four_bit);
  EXPECT_EQ(cfg.pipeline.prune.p, 0.9);
  EXPECT_EQ(cfg.pipeline.output, Normalization::renormalize);
  EXPECT_FALSE(cfg.pipeline.group_map.has_value());
  EXPECT_TRUE(cfg.bypass_layers.empty());
}

TEST(Config, FullDocument) {
  const auto cfg = parse_config(R"({
    "workload": {"kind": "logit_temperature", "n": 4096, "d": 128, "heads": 8,
                 "group_size": 4, "temperature": 0.5, "seed": 7, "count": 2,
                 "prompts": 3, "layers": 4},
    "selector": {"kind": "channel_pruned", "budget_tokens": 512, "top_channels": 16},
    "prune": {"p": 0.85, "epsilon": 1e-12, "max_iters": 40},
    "estimator": {"bits": 2, "page_size": 32},
    "pipeline": {"renormalize_output": false, "group_union": true, "selector_cost": "1/8"}
  })");
  EXPECT_EQ(cfg.workload.kind, WorkloadKind::logit_temperature);
  EXPECT_EQ(cfg.workload.n, 4096u);
  EXPECT_EQ(cfg.workload.seed, 7u);
  EXPECT_EQ(cfg.workload.item_count(), 24u);
  EXPECT_EQ(cfg.pipeline.selector.kind, SelectorKind::channel_pruned);
  EXPECT_EQ(cfg.pipeline.selector.budget.unit, Budget::Unit::tokens);
  EXPECT_EQ(cfg.pipeline.selector.budget.resolve(4096), 512u);
  EXPECT_EQ(cfg.pipeline.prune.p, 0.85);
  EXPECT_EQ(cfg.pipeline.prune.max_iters, 40);
  EXPECT_EQ(cfg.pipeline.estimator, EstimatorMode::two_bit);
  EXPECT_EQ(cfg.pipeline.cache_page_size, 32u);
  EXPECT_EQ(cfg.pipeline.output, Normalization::none);
  ASSERT_TRUE(cfg.pipeline.group_map.has_value());
  EXPECT_EQ(cfg.pipeline.group_map->group_size, 4u);
  EXPECT_EQ(cfg.pipeline.selector_cost, Fraction(1, 8));
  EXPECT_EQ(cfg.bypass_layers, (std::vector<std::size_t>{0, 1}));
  EXPECT_TRUE(cfg.is_bypassed(1));
  EXPECT_FALSE(cfg.is_bypassed(2));
}

TEST(Config, ExplicitBypassOverridesDefault) {
  const auto cfg = parse_config(
      R"({"workload": {"layers": 3}, "pipeline": {"bypass_layers": []}})");
  EXPECT_TRUE(cfg.bypass_layers.empty());
  EXPECT_FALSE(cfg.is_bypassed(0));
}

TEST(Config, Rejections) {
  const char* bad[] = {
      "{",                                                        // malformed
      R"({"workloads": {}})",                                     // unknown section
      R"({"prune": {"p": 0.9, "eps": 1}})",                       // unknown key
      R"({"prune": {"p": "high"}})",                              // wrong type
      R"({"prune": {"p": 1.5}})",                                 // out of range
      R"({"selector": {"kind": "lsh"}})",                         // unknown enum
      R"({"selector": {"budget_fraction": 0.1, "budget_tokens": 5}})",
      R"({"estimator": {"bits": 3}})",
      R"({"workload": {"n": -5}})",
      R"({"workload": {"seed": -1}})",
      R"({"workload": {"heads": 6, "group_size": 4}})",
      R"({"pipeline": {"selector_cost": "a/b"}})",
      R"({"pipeline": {"selector_cost": "1/0"}})",
      R"([1, 2])",
  };
  for (const char* doc : bad) EXPECT_THROW((void)parse_config(doc), ConfigError) << doc;
}

TEST(Config, DumpRoundtrips) {
  const auto cfg = parse_config(R"({
    "workload": {"heads": 4, "group_size": 2, "layers": 3, "head_temperatures": [1, 2, 3, 4],
                 "kind": "logit_temperature"},
    "selector": {"kind": "sink_window", "sink": 8, "window": 100},
    "estimator": {"bits": "exact"},
    "pipeline": {"group_union": true, "selector_cost": 1}
  })");
  const auto text = dump_config(cfg);
  const auto again = parse_config(text);
  EXPECT_EQ(dump_config(again), text);
  EXPECT_EQ(again.pipeline.estimator, EstimatorMode::exact);
  EXPECT_EQ(again.pipeline.selector_cost, Fraction(1));
  EXPECT_EQ(again.workload.head_temperatures.size(), 4u);
}

TEST(Config, LoadFromFile) {
  const auto path = std::filesystem::temp_directory_path() / "topp_config_test.json";
  {
    std::ofstream out(path);
    out << R"({"prune": {"p": 0.5}})";
  }
  EXPECT_EQ(load_config(path).pipeline.prune.p, 0.5);
  std::filesystem::remove(path);
  EXPECT_THROW((void)load_config(path), ConfigError);
}

}  // namespace
}  // namespace topp
