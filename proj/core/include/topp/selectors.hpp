// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "topp/attention.hpp"
#include "topp/matrix.hpp"
#include "topp/quant_cache.hpp"

namespace topp {

enum class SelectorKind { full, quest, channel_pruned, sink_window };

[[nodiscard]] std::string_view to_string(SelectorKind kind) noexcept;
/// Throws ConfigError on unknown names.
[[nodiscard]] SelectorKind selector_kind_from_string(std::string_view name);

/// Candidate budget B0, either an absolute token count or a fraction of n.
struct Budget {
  enum class Unit { tokens, fraction };
  Unit unit = Unit::fraction;
  double value = 0.25;

  [[nodiscard]] static Budget tokens(std::size_t count) {
    return {Unit::tokens, static_cast<double>(count)};
  }
  [[nodiscard]] static Budget fraction(double f) { return {Unit::fraction, f}; }

  /// Token count for a context of n tokens, clamped to n. Fractions round up.
  [[nodiscard]] std::size_t resolve(std::size_t n) const;
  void validate() const;
};

struct SelectorConfig {
  SelectorKind kind = SelectorKind::quest;
  Budget budget = Budget::fraction(0.25);
  std::size_t page_size = 16;     ///< quest
  std::size_t top_channels = 16;  ///< channel_pruned
  std::size_t sink = 4;           ///< sink_window
  std::size_t window = 64;        ///< sink_window

  void validate() const;
};

/// Key slices on the channels with the largest mean |K|, chosen offline.
struct ChannelIndex {
  std::vector<std::size_t> channels;  ///< ascending channel ids
  Matrix<float> reduced;              ///< n x channels.size()
};

[[nodiscard]] ChannelIndex build_channel_index(const Matrix<float>& keys, std::size_t top_channels);

[[nodiscard]] TokenSelection select_full(std::size_t n);

/// Upper bound on q . k over every key k inside the page's channel box:
/// sum_c max(q_c * min_c, q_c * max_c).
[[nodiscard]] double quest_page_score(std::span<const float> q, const PageMetadata& page);

/// Keeps the ceil(budget / page_size) pages with the highest bound (ties by
/// lower page index) and returns all of their tokens.
[[nodiscard]] TokenSelection select_quest(std::span<const float> q,
                                          std::span<const PageMetadata> metadata,
                                          std::size_t budget, std::size_t page_size);

/// Top-`budget` tokens by the dot product on the reduced channel set.
[[nodiscard]] TokenSelection select_channel_pruned(std::span<const float> q,
                                                   const ChannelIndex& index, std::size_t budget);

/// First `sink` and last `window` tokens; all tokens when they overlap.
[[nodiscard]] TokenSelection select_sink_window(std::size_t n, std::size_t sink,
                                                std::size_t window);

/// Sorted union of per-head selections over the same context.
[[nodiscard]] TokenSelection group_union(std::span<const TokenSelection> selections);

/// Everything a selector may need for one KV head. Pointers that the chosen
/// kind does not use may be null.
struct SelectorInputs {
  std::span<const float> q;
  std::size_t n = 0;
  const std::vector<PageMetadata>* metadata = nullptr;
  const ChannelIndex* channels = nullptr;
};

[[nodiscard]] TokenSelection run_selector(const SelectorConfig& config, const SelectorInputs& in);

}  // namespace topp
