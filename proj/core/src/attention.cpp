// SPDX-License-Identifier: Apache-2.0

#include "topp/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace topp {
namespace {

template <typename T>
void require_finite(std::span<const T> xs, const char* what) {
  for (T x : xs) {
    if (!std::isfinite(x)) {
      throw NonFiniteError(std::string(what) + ": non-finite value");
    }
  }
}

}  // namespace

// AttentionWeights ----------------------------------------------------------

AttentionWeights::AttentionWeights(std::vector<double> w) : w_(std::move(w)) {
  double total = 0.0;
  for (double x : w_) {
    if (!std::isfinite(x)) throw NonFiniteError("AttentionWeights: non-finite weight");
    if (x < 0.0) throw InvalidArgument("AttentionWeights: negative weight");
    total += x;
  }
  if (w_.empty() || std::abs(total - 1.0) > kNormalizationTolerance) {
    throw InvalidArgument("AttentionWeights: weights must sum to 1 (got " +
                          std::to_string(total) + ")");
  }
}

AttentionWeights AttentionWeights::normalize(std::vector<double> raw) {
  double total = 0.0;
  for (double x : raw) {
    if (!std::isfinite(x)) throw NonFiniteError("AttentionWeights: non-finite weight");
    if (x < 0.0) throw InvalidArgument("AttentionWeights: negative weight");
    total += x;
  }
  if (!(total > 0.0)) {
    throw DegenerateSelectionError("AttentionWeights: cannot normalize zero total mass");
  }
  for (double& x : raw) x /= total;
  return AttentionWeights(std::move(raw));
}

AttentionWeights AttentionWeights::restrict_to(std::span<const std::size_t> indices) const {
  std::vector<double> sub;
  sub.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= w_.size()) throw InvalidArgument("restrict_to: index out of range");
    sub.push_back(w_[i]);
  }
  return normalize(std::move(sub));
}

double AttentionWeights::max() const noexcept {
  return w_.empty() ? 0.0 : *std::max_element(w_.begin(), w_.end());
}

// TokenSelection ------------------------------------------------------------

TokenSelection TokenSelection::from_indices(std::size_t n, std::vector<std::size_t> indices) {
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
  if (!indices.empty() && indices.back() >= n) {
    throw InvalidArgument("TokenSelection: index " + std::to_string(indices.back()) +
                          " out of range for n=" + std::to_string(n));
  }
  TokenSelection s;
  s.mask_.assign(n, false);
  for (std::size_t i : indices) s.mask_[i] = true;
  s.indices_ = std::move(indices);
  return s;
}

TokenSelection TokenSelection::from_mask(std::vector<bool> mask) {
  TokenSelection s;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) s.indices_.push_back(i);
  }
  s.mask_ = std::move(mask);
  return s;
}

TokenSelection TokenSelection::all(std::size_t n) {
  TokenSelection s;
  s.indices_.resize(n);
  std::iota(s.indices_.begin(), s.indices_.end(), std::size_t{0});
  s.mask_.assign(n, true);
  return s;
}

TokenSelection TokenSelection::none(std::size_t n) {
  TokenSelection s;
  s.mask_.assign(n, false);
  return s;
}

double TokenSelection::mass_under(const AttentionWeights& w) const {
  if (w.size() != mask_.size()) {
    throw DimensionError("TokenSelection: weight length differs from context length");
  }
  double mass = 0.0;
  for (std::size_t i : indices_) mass += w[i];
  return mass;
}

TokenSelection& TokenSelection::measure(const AttentionWeights& w) {
  attained_mass_ = std::clamp(mass_under(w), 0.0, 1.0);
  return *this;
}

bool TokenSelection::is_subset_of(const TokenSelection& other) const {
  return std::all_of(indices_.begin(), indices_.end(),
                     [&](std::size_t i) { return other.contains(i); });
}

// Dense arithmetic ----------------------------------------------------------

template <typename T>
std::vector<T> attention_logits(std::span<const T> q, const Matrix<T>& keys) {
  if (keys.rows() == 0) throw DimensionError("attention_logits: empty key matrix");
  if (q.empty() || q.size() != keys.cols()) {
    throw DimensionError("attention_logits: query length " + std::to_string(q.size()) +
                         " does not match head dimension " + std::to_string(keys.cols()));
  }
  require_finite(q, "attention_logits(q)");
  require_finite(keys.flat(), "attention_logits(K)");

  const T scale = T(1) / std::sqrt(static_cast<T>(q.size()));
  std::vector<T> logits(keys.rows());
  for (std::size_t i = 0; i < keys.rows(); ++i) {
    auto k = keys.row(i);
    T dot = std::inner_product(q.begin(), q.end(), k.begin(), T(0));
    logits[i] = dot * scale;
  }
  return logits;
}

template <typename T>
AttentionWeights softmax(std::span<const T> logits) {
  if (logits.empty()) throw DimensionError("softmax: empty input");
  require_finite(logits, "softmax");
  const T peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> w(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const T e = std::exp(logits[i] - peak);
    w[i] = static_cast<double>(e);
    total += w[i];
  }
  for (double& x : w) x /= total;
  return AttentionWeights(std::move(w));
}

template <typename T>
AttentionWeights attention_weights(std::span<const T> q, const Matrix<T>& keys) {
  const auto logits = attention_logits(q, keys);
  return softmax<T>(logits);
}

template <typename T>
std::vector<T> sparse_attention(const AttentionWeights& weights, const Matrix<T>& values,
                                const TokenSelection& selection, Normalization normalization) {
  if (weights.size() != values.rows()) {
    throw DimensionError("sparse_attention: weights and V disagree on n");
  }
  if (selection.context_length() != values.rows()) {
    throw DimensionError("sparse_attention: selection context length differs from n");
  }
  std::vector<T> out(values.cols(), T(0));
  double mass = 0.0;
  for (std::size_t i : selection.indices()) {
    const T w = static_cast<T>(weights[i]);
    mass += weights[i];
    auto v = values.row(i);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += w * v[c];
  }
  if (normalization == Normalization::renormalize) {
    if (!(mass > 0.0)) {
      throw DegenerateSelectionError(
          "sparse_attention: cannot renormalize a selection with zero attained mass");
    }
    const T inv = static_cast<T>(1.0 / mass);
    for (T& x : out) x *= inv;
  }
  return out;
}

template <typename T>
std::vector<T> full_attention(std::span<const T> q, const Matrix<T>& keys,
                              const Matrix<T>& values) {
  if (keys.rows() != values.rows()) {
    throw DimensionError("full_attention: K and V disagree on n");
  }
  const auto w = attention_weights(q, keys);
  return sparse_attention(w, values, TokenSelection::all(keys.rows()), Normalization::none);
}

template <typename T>
double output_error(std::span<const T> exact, std::span<const T> approx) {
  if (exact.size() != approx.size()) throw DimensionError("output_error: length mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < exact.size(); ++i) {
    const double diff = static_cast<double>(exact[i]) - static_cast<double>(approx[i]);
    sum += diff * diff;
  }
  return std::sqrt(sum);
}

template <typename T>
double frobenius_norm(const Matrix<T>& m) {
  require_finite(m.flat(), "frobenius_norm");
  double sum = 0.0;
  for (T x : m.flat()) sum += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(sum);
}

template <typename T>
double error_bound(const AttentionWeights& weights, const TokenSelection& selection,
                   const Matrix<T>& values) {
  const double residual = std::max(0.0, 1.0 - selection.mass_under(weights));
  return residual * frobenius_norm(values);
}

#define TOPP_INSTANTIATE(T)                                                                   \
  template std::vector<T> attention_logits<T>(std::span<const T>, const Matrix<T>&);          \
  template AttentionWeights softmax<T>(std::span<const T>);                                   \
  template AttentionWeights attention_weights<T>(std::span<const T>, const Matrix<T>&);       \
  template std::vector<T> sparse_attention<T>(const AttentionWeights&, const Matrix<T>&,      \
                                              const TokenSelection&, Normalization);          \
  template std::vector<T> full_attention<T>(std::span<const T>, const Matrix<T>&,             \
                                            const Matrix<T>&);                                \
  template double output_error<T>(std::span<const T>, std::span<const T>);                    \
  template double frobenius_norm<T>(const Matrix<T>&);                                        \
  template double error_bound<T>(const AttentionWeights&, const TokenSelection&, const Matrix<T>&);

TOPP_INSTANTIATE(float)
TOPP_INSTANTIATE(double)

#undef TOPP_INSTANTIATE

}  // namespace topp
