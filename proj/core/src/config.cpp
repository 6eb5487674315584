// SPDX-License-Identifier: Apache-2.0

#include "topp/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include <json.hpp>

namespace topp {

using nlohmann::json;

bool RunConfig::is_bypassed(std::size_t layer) const {
  return std::find(bypass_layers.begin(), bypass_layers.end(), layer) != bypass_layers.end();
}

namespace {

void reject_unknown(const json& object, std::string_view section,
                    std::initializer_list<std::string_view> allowed) {
  if (!object.is_object()) {
    throw ConfigError("config: section '" + std::string(section) + "' must be an object");
  }
  for (const auto& [key, value] : object.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("config: unknown key '" + key + "' in section '" +
                        std::string(section) + "'");
    }
  }
}

template <typename T>
void read(const json& object, std::string_view section, const char* key, T& out) {
  if (!object.contains(key)) return;
  try {
    out = object.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config: " + std::string(section) + "." + key + ": " + e.what());
  }
}

void read_size(const json& object, std::string_view section, const char* key, std::size_t& out) {
  if (!object.contains(key)) return;
  const json& v = object.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError("config: " + std::string(section) + "." + key +
                      " must be a non-negative integer");
  }
  out = v.get<std::size_t>();
}

Fraction parse_fraction(const json& v) {
  if (v.is_number_integer()) return Fraction(v.get<std::int64_t>());
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    const auto slash = s.find('/');
    std::int64_t num = 0;
    std::int64_t den = 1;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    const char* mid = slash == std::string::npos ? end : s.data() + slash;
    auto r1 = std::from_chars(begin, mid, num);
    bool ok = r1.ec == std::errc() && r1.ptr == mid;
    if (ok && slash != std::string::npos) {
      auto r2 = std::from_chars(mid + 1, end, den);
      ok = r2.ec == std::errc() && r2.ptr == end && den > 0;
    }
    if (ok) return Fraction(num, den);
  }
  throw ConfigError("config: pipeline.selector_cost must be an integer or \"a/b\"");
}

void parse_workload(const json& j, RunConfig& cfg) {
  reject_unknown(j, "workload",
                 {"kind", "n", "d", "heads", "group_size", "temperature", "head_temperatures",
                  "seed", "count", "prompts", "layers", "q_path", "k_path", "v_path"});
  WorkloadSpec& w = cfg.workload;
  if (j.contains("kind")) {
    std::string kind;
    read(j, "workload", "kind", kind);
    w.kind = workload_kind_from_string(kind);
  }
  read_size(j, "workload", "n", w.n);
  read_size(j, "workload", "d", w.d);
  read_size(j, "workload", "heads", w.heads);
  read_size(j, "workload", "group_size", w.group_size);
  read(j, "workload", "temperature", w.temperature);
  read(j, "workload", "head_temperatures", w.head_temperatures);
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned() && !(j.at("seed").is_number_integer() && j.at("seed").get<long long>() >= 0)) {
      throw ConfigError("config: workload.seed must be an unsigned integer");
    }
    w.seed = j.at("seed").get<std::uint64_t>();
  }
  read_size(j, "workload", "count", w.count);
  read_size(j, "workload", "prompts", w.prompts);
  read_size(j, "workload", "layers", w.layers);
  std::string path;
  if (j.contains("q_path")) { read(j, "workload", "q_path", path); w.q_path = path; }
  if (j.contains("k_path")) { read(j, "workload", "k_path", path); w.k_path = path; }
  if (j.contains("v_path")) { read(j, "workload", "v_path", path); w.v_path = path; }
}

void parse_selector(const json& j, RunConfig& cfg) {
  reject_unknown(j, "selector", {"kind", "budget_fraction", "budget_tokens", "page_size",
                                 "top_channels", "sink", "window"});
  SelectorConfig& s = cfg.pipeline.selector;
  if (j.contains("kind")) {
    std::string kind;
    read(j, "selector", "kind", kind);
    s.kind = selector_kind_from_string(kind);
  }
  if (j.contains("budget_fraction") && j.contains("budget_tokens")) {
    throw ConfigError("config: selector takes budget_fraction or budget_tokens, not both");
  }
  if (j.contains("budget_fraction")) {
    double f = 0.0;
    read(j, "selector", "budget_fraction", f);
    s.budget = Budget::fraction(f);
  }
  if (j.contains("budget_tokens")) {
    std::size_t t = 0;
    read_size(j, "selector", "budget_tokens", t);
    s.budget = Budget::tokens(t);
  }
  read_size(j, "selector", "page_size", s.page_size);
  read_size(j, "selector", "top_channels", s.top_channels);
  read_size(j, "selector", "sink", s.sink);
  read_size(j, "selector", "window", s.window);
}

void parse_prune(const json& j, RunConfig& cfg) {
  reject_unknown(j, "prune", {"p", "epsilon", "max_iters"});
  BinarySearchConfig& b = cfg.pipeline.prune;
  read(j, "prune", "p", b.p);
  read(j, "prune", "epsilon", b.epsilon);
  read(j, "prune", "max_iters", b.max_iters);
}

void parse_estimator(const json& j, RunConfig& cfg) {
  reject_unknown(j, "estimator", {"bits", "page_size"});
  if (j.contains("bits")) {
    const json& v = j.at("bits");
    std::string name;
    if (v.is_string()) {
      name = v.get<std::string>();
    } else if (v.is_number_integer()) {
      name = std::to_string(v.get<long long>());
    } else {
      throw ConfigError("config: estimator.bits must be 2, 4, 8 or \"exact\"");
    }
    cfg.pipeline.estimator = estimator_mode_from_string(name);
  }
  read_size(j, "estimator", "page_size", cfg.pipeline.cache_page_size);
}

void parse_pipeline(const json& j, RunConfig& cfg, bool& bypass_given) {
  reject_unknown(j, "pipeline",
                 {"renormalize_output", "group_union", "bypass_layers", "selector_cost"});
  if (j.contains("renormalize_output")) {
    bool renorm = true;
    read(j, "pipeline", "renormalize_output", renorm);
    cfg.pipeline.output = renorm ? Normalization::renormalize : Normalization::none;
  }
  if (j.contains("group_union")) {
    bool grouped = false;
    read(j, "pipeline", "group_union", grouped);
    if (grouped) cfg.pipeline.group_map = GroupMap{cfg.workload.group_size};
  }
  if (j.contains("bypass_layers")) {
    read(j, "pipeline", "bypass_layers", cfg.bypass_layers);
    bypass_given = true;
  }
  if (j.contains("selector_cost")) cfg.pipeline.selector_cost = parse_fraction(j.at("selector_cost"));
}

}  // namespace

RunConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  reject_unknown(doc, "<root>", {"workload", "selector", "prune", "estimator", "pipeline"});

  RunConfig cfg;
  bool bypass_given = false;
  if (doc.contains("workload")) parse_workload(doc.at("workload"), cfg);
  if (doc.contains("selector")) parse_selector(doc.at("selector"), cfg);
  if (doc.contains("prune")) parse_prune(doc.at("prune"), cfg);
  if (doc.contains("estimator")) parse_estimator(doc.at("estimator"), cfg);
  // Parsed after workload so group_union picks up the group size.
  if (doc.contains("pipeline")) parse_pipeline(doc.at("pipeline"), cfg, bypass_given);

  if (!bypass_given && cfg.workload.layers > 1) cfg.bypass_layers = {0, 1};

  try {
    cfg.workload.validate();
    cfg.pipeline.validate();
    if (cfg.pipeline.group_map) cfg.pipeline.group_map->validate(cfg.workload.heads);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string dump_config(const RunConfig& cfg) {
  const WorkloadSpec& w = cfg.workload;
  const PipelineConfig& p = cfg.pipeline;
  json doc;
  doc["workload"] = {{"kind", to_string(w.kind)}, {"n", w.n},       {"d", w.d},
                     {"heads", w.heads},          {"group_size", w.group_size},
                     {"temperature", w.temperature}, {"seed", w.seed},
                     {"count", w.count},          {"prompts", w.prompts},
                     {"layers", w.layers}};
  if (!w.head_temperatures.empty()) doc["workload"]["head_temperatures"] = w.head_temperatures;
  if (w.kind == WorkloadKind::file) {
    doc["workload"]["q_path"] = w.q_path.string();
    doc["workload"]["k_path"] = w.k_path.string();
    doc["workload"]["v_path"] = w.v_path.string();
  }
  json selector = {{"kind", to_string(p.selector.kind)},
                   {"page_size", p.selector.page_size},
                   {"top_channels", p.selector.top_channels},
                   {"sink", p.selector.sink},
                   {"window", p.selector.window}};
  if (p.selector.budget.unit == Budget::Unit::fraction) {
    selector["budget_fraction"] = p.selector.budget.value;
  } else {
    selector["budget_tokens"] = static_cast<std::size_t>(p.selector.budget.value);
  }
  doc["selector"] = selector;
  doc["prune"] = {{"p", p.prune.p}, {"epsilon", p.prune.epsilon}, {"max_iters", p.prune.max_iters}};
  doc["estimator"] = {{"bits", to_string(p.estimator)}, {"page_size", p.cache_page_size}};
  doc["pipeline"] = {
      {"renormalize_output", p.output == Normalization::renormalize},
      {"group_union", p.group_map.has_value()},
      {"bypass_layers", cfg.bypass_layers},
      {"selector_cost", std::to_string(p.selector_cost.numerator()) + "/" +
                            std::to_string(p.selector_cost.denominator())}};
  return doc.dump(2);
}

}  // namespace topp
