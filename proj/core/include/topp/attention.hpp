// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "topp/matrix.hpp"

namespace topp {

/// Tolerance for the "weights sum to one" invariant.
inline constexpr double kNormalizationTolerance = 1e-6;

/// Slack applied whenever a selection's mass is compared with a threshold p.
/// Shared by the oracle and the pruner so the two agree on borderline cases.
inline constexpr double kMassSlack = 1e-9;

/// True when `mass` reaches the threshold `p` up to kMassSlack.
[[nodiscard]] constexpr bool reaches(double mass, double p) noexcept {
  return mass >= p - kMassSlack;
}

/// A normalized, non-negative weight vector over the context tokens.
class AttentionWeights {
 public:
  AttentionWeights() = default;

  /// Validates non-negativity, finiteness and unit sum (kNormalizationTolerance).
  explicit AttentionWeights(std::vector<double> w);

  /// Normalizes an arbitrary non-negative vector. Throws DegenerateSelectionError
  /// when the total is zero.
  [[nodiscard]] static AttentionWeights normalize(std::vector<double> raw);

  /// Restricts to `indices` and renormalizes the restriction.
  [[nodiscard]] AttentionWeights restrict_to(std::span<const std::size_t> indices) const;

  [[nodiscard]] std::size_t size() const noexcept { return w_.size(); }
  [[nodiscard]] double operator[](std::size_t i) const noexcept { return w_[i]; }
  [[nodiscard]] std::span<const double> values() const noexcept { return w_; }
  [[nodiscard]] double max() const noexcept;

 private:
  std::vector<double> w_;
};

/// A strictly increasing index set over n tokens, with its boolean mask.
///
/// `attained_mass()` is only meaningful after `measure()` was called against a
/// particular weight vector; factories leave it at zero.
class TokenSelection {
 public:
  TokenSelection() = default;

  /// Sorts and de-duplicates `indices`. Throws InvalidArgument on i >= n.
  [[nodiscard]] static TokenSelection from_indices(std::size_t n, std::vector<std::size_t> indices);
  [[nodiscard]] static TokenSelection from_mask(std::vector<bool> mask);
  [[nodiscard]] static TokenSelection all(std::size_t n);
  [[nodiscard]] static TokenSelection none(std::size_t n);

  [[nodiscard]] std::size_t context_length() const noexcept { return mask_.size(); }
  [[nodiscard]] std::size_t size() const noexcept { return indices_.size(); }
  [[nodiscard]] bool empty() const noexcept { return indices_.empty(); }
  [[nodiscard]] std::span<const std::size_t> indices() const noexcept { return indices_; }
  [[nodiscard]] const std::vector<bool>& mask() const noexcept { return mask_; }
  [[nodiscard]] bool contains(std::size_t i) const noexcept { return i < mask_.size() && mask_[i]; }

  [[nodiscard]] double attained_mass() const noexcept { return attained_mass_; }

  /// Sum of `w` over the selected indices (does not modify the selection).
  [[nodiscard]] double mass_under(const AttentionWeights& w) const;

  /// Records mass_under(w) as the attained mass and returns *this.
  TokenSelection& measure(const AttentionWeights& w);

  /// True when every index of *this is also in `other`.
  [[nodiscard]] bool is_subset_of(const TokenSelection& other) const;

  friend bool operator==(const TokenSelection& a, const TokenSelection& b) {
    return a.indices_ == b.indices_ && a.mask_.size() == b.mask_.size();
  }

 private:
  std::vector<std::size_t> indices_;
  std::vector<bool> mask_;
  double attained_mass_ = 0.0;
};

enum class Normalization {
  none,         ///< o_hat = sum_{i in I} w_i v_i
  renormalize,  ///< o_hat divided by the selection's attained mass
};

/// q . k_i / sqrt(d) for every row of K.
template <typename T>
[[nodiscard]] std::vector<T> attention_logits(std::span<const T> q, const Matrix<T>& keys);

/// Max-subtracted softmax. Exponentials are evaluated in T, the normalizing
/// sum in double.
template <typename T>
[[nodiscard]] AttentionWeights softmax(std::span<const T> logits);

template <typename T>
[[nodiscard]] AttentionWeights attention_weights(std::span<const T> q, const Matrix<T>& keys);

/// Attention output restricted to `selection`. With Normalization::none an
/// empty selection yields the zero vector; with renormalize it throws
/// DegenerateSelectionError.
template <typename T>
[[nodiscard]] std::vector<T> sparse_attention(const AttentionWeights& weights,
                                              const Matrix<T>& values,
                                              const TokenSelection& selection,
                                              Normalization normalization);

template <typename T>
[[nodiscard]] std::vector<T> full_attention(std::span<const T> q, const Matrix<T>& keys,
                                            const Matrix<T>& values);

/// Euclidean distance between two outputs.
template <typename T>
[[nodiscard]] double output_error(std::span<const T> exact, std::span<const T> approx);

template <typename T>
[[nodiscard]] double frobenius_norm(const Matrix<T>& m);

/// Right-hand side of the sparse-output error bound: (1 - mass(I)) * ||V||_F.
template <typename T>
[[nodiscard]] double error_bound(const AttentionWeights& weights, const TokenSelection& selection,
                                 const Matrix<T>& values);

}  // namespace topp
