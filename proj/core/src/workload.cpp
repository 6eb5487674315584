// SPDX-License-Identifier: Apache-2.0

#include "topp/workload.hpp"

#include <cmath>
#include <string>

#include "topp/tensor_io.hpp"

namespace topp {

std::string_view to_string(WorkloadKind kind) noexcept {
  switch (kind) {
    case WorkloadKind::gaussian_qk: return "gaussian_qk";
    case WorkloadKind::logit_temperature: return "logit_temperature";
    case WorkloadKind::file: return "file";
  }
  return "unknown";
}

WorkloadKind workload_kind_from_string(std::string_view name) {
  for (auto kind : {WorkloadKind::gaussian_qk, WorkloadKind::logit_temperature, WorkloadKind::file}) {
    if (name == to_string(kind)) return kind;
  }
  throw ConfigError("unknown workload kind '" + std::string(name) + "'");
}

void WorkloadSpec::validate() const {
  if (kind != WorkloadKind::file && (n == 0 || d == 0)) {
    throw InvalidArgument("workload: n and d must be positive");
  }
  if (heads == 0 || group_size == 0 || heads % group_size != 0) {
    throw InvalidArgument("workload: heads must be a positive multiple of group_size");
  }
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw InvalidArgument("workload: temperature must be positive");
  }
  if (!head_temperatures.empty()) {
    if (head_temperatures.size() != heads) {
      throw InvalidArgument("workload: head_temperatures needs one entry per head");
    }
    for (double t : head_temperatures) {
      if (!(t > 0.0) || !std::isfinite(t)) {
        throw InvalidArgument("workload: head temperatures must be positive");
      }
    }
  }
  if (kind == WorkloadKind::file && (q_path.empty() || k_path.empty() || v_path.empty())) {
    throw InvalidArgument("workload: file workloads need q_path, k_path and v_path");
  }
}

std::mt19937_64 item_rng(std::uint64_t seed, std::size_t prompt, std::size_t step,
                         std::size_t layer) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(prompt), static_cast<std::uint32_t>(step),
                    static_cast<std::uint32_t>(layer)};
  return std::mt19937_64(seq);
}

namespace {

Matrix<float> gaussian_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<float> normal(0.0f, 1.0f);
  Matrix<float> m(rows, cols);
  for (float& x : m.flat()) x = normal(rng);
  return m;
}

// Rank-3 [kv_heads, n, d] or rank-2 [n, d] tensor into per-head matrices.
std::vector<Matrix<float>> split_heads(const Tensor& t) {
  if (t.dims.size() == 2) return {to_matrix(t)};
  if (t.dims.size() != 3) {
    throw TensorIoError(TensorErrc::shape_mismatch, "workload: K/V tensors must be rank 2 or 3");
  }
  const std::size_t heads = t.dims[0];
  const std::size_t n = t.dims[1];
  const std::size_t d = t.dims[2];
  std::vector<Matrix<float>> out;
  for (std::size_t h = 0; h < heads; ++h) {
    auto first = t.data.begin() + static_cast<std::ptrdiff_t>(h * n * d);
    out.emplace_back(n, d, std::vector<float>(first, first + static_cast<std::ptrdiff_t>(n * d)));
  }
  return out;
}

}  // namespace

Matrix<float> keys_for_logits(std::span<const float> q, std::span<const double> logits,
                              std::mt19937_64& rng) {
  const std::size_t d = q.size();
  double q_norm2 = 0.0;
  for (float x : q) q_norm2 += static_cast<double>(x) * x;
  if (!(q_norm2 > 0.0)) throw InvalidArgument("keys_for_logits: zero query");
  const double sqrt_d = std::sqrt(static_cast<double>(d));

  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix<float> keys(logits.size(), d);
  std::vector<double> noise(d);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    double proj = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      noise[c] = normal(rng);
      proj += noise[c] * q[c];
    }
    const double along = (logits[i] * sqrt_d - proj) / q_norm2;
    for (std::size_t c = 0; c < d; ++c) {
      keys(i, c) = static_cast<float>(noise[c] + along * q[c]);
    }
  }
  return keys;
}

AttentionWeights random_weights(std::size_t n, double temperature, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> logits(n);
  for (double& z : logits) z = normal(rng) / temperature;
  return softmax<double>(logits);
}

WorkloadItem generate_item(const WorkloadSpec& spec, std::size_t prompt, std::size_t step,
                           std::size_t layer) {
  spec.validate();
  WorkloadItem item{prompt, step, layer, {}};
  AttentionProblem& p = item.problem;

  if (spec.kind == WorkloadKind::file) {
    p.queries = to_matrix(read_tensor(spec.q_path));
    p.keys = split_heads(read_tensor(spec.k_path));
    p.values = split_heads(read_tensor(spec.v_path));
    p.validate();
    return item;
  }

  auto rng = item_rng(spec.seed, prompt, step, layer);
  const std::size_t kv = spec.kv_heads();
  const std::size_t g = spec.group_size;

  if (spec.kind == WorkloadKind::gaussian_qk) {
    p.queries = gaussian_matrix(spec.heads, spec.d, rng);
    for (std::size_t k = 0; k < kv; ++k) {
      p.keys.push_back(gaussian_matrix(spec.n, spec.d, rng));
      p.values.push_back(gaussian_matrix(spec.n, spec.d, rng));
    }
    return item;
  }

  // logit_temperature: the first query head of each group is the anchor the
  // keys are built for; the other heads in the group perturb the anchor.
  std::normal_distribution<double> normal(0.0, 1.0);
  p.queries = Matrix<float>(spec.heads, spec.d);
  for (std::size_t k = 0; k < kv; ++k) {
    const std::size_t anchor = k * g;
    const double tau =
        spec.head_temperatures.empty() ? spec.temperature : spec.head_temperatures[anchor];
    auto q = p.queries.row(anchor);
    for (float& x : q) x = static_cast<float>(normal(rng));
    std::vector<double> logits(spec.n);
    for (double& z : logits) z = normal(rng) / tau;
    p.keys.push_back(keys_for_logits(q, logits, rng));
    p.values.push_back(gaussian_matrix(spec.n, spec.d, rng));
    for (std::size_t h = 1; h < g; ++h) {
      const double tau_h = spec.head_temperatures.empty() ? spec.temperature
                                                          : spec.head_temperatures[anchor + h];
      auto qh = p.queries.row(anchor + h);
      // Scaling the query sharpens or flattens the head's own distribution.
      for (std::size_t c = 0; c < spec.d; ++c) {
        qh[c] = static_cast<float>((q[c] + 0.5 * normal(rng)) * tau / tau_h);
      }
    }
  }
  return item;
}

std::vector<WorkloadItem> generate_workload(const WorkloadSpec& spec) {
  spec.validate();
  std::vector<WorkloadItem> items;
  if (spec.kind == WorkloadKind::file) {
    items.push_back(generate_item(spec, 0, 0, 0));
    return items;
  }
  items.reserve(spec.item_count());
  for (std::size_t prompt = 0; prompt < spec.prompts; ++prompt) {
    for (std::size_t step = 0; step < spec.count; ++step) {
      for (std::size_t layer = 0; layer < spec.layers; ++layer) {
        items.push_back(generate_item(spec, prompt, step, layer));
      }
    }
  }
  return items;
}

}  // namespace topp
