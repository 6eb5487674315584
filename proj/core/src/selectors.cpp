// SPDX-License-Identifier: Apache-2.0

#include "topp/selectors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace topp {

std::string_view to_string(SelectorKind kind) noexcept {
  switch (kind) {
    case SelectorKind::full: return "full";
    case SelectorKind::quest: return "quest";
    case SelectorKind::channel_pruned: return "channel_pruned";
    case SelectorKind::sink_window: return "sink_window";
  }
  return "unknown";
}

SelectorKind selector_kind_from_string(std::string_view name) {
  for (auto kind : {SelectorKind::full, SelectorKind::quest, SelectorKind::channel_pruned,
                    SelectorKind::sink_window}) {
    if (name == to_string(kind)) return kind;
  }
  throw ConfigError("unknown selector kind '" + std::string(name) + "'");
}

void Budget::validate() const {
  if (unit == Unit::fraction) {
    if (!(value > 0.0 && value <= 1.0)) {
      throw InvalidArgument("budget fraction must lie in (0, 1]");
    }
  } else if (!(value >= 0.0) || value != std::floor(value)) {
    throw InvalidArgument("budget token count must be a non-negative integer");
  }
}

std::size_t Budget::resolve(std::size_t n) const {
  validate();
  const double raw = unit == Unit::fraction ? std::ceil(value * static_cast<double>(n)) : value;
  return std::min(n, static_cast<std::size_t>(raw));
}

void SelectorConfig::validate() const {
  budget.validate();
  if (kind == SelectorKind::quest && page_size == 0) {
    throw InvalidArgument("quest selector: page_size must be >= 1");
  }
  if (kind == SelectorKind::channel_pruned && top_channels == 0) {
    throw InvalidArgument("channel_pruned selector: top_channels must be >= 1");
  }
}

ChannelIndex build_channel_index(const Matrix<float>& keys, std::size_t top_channels) {
  if (top_channels == 0) throw InvalidArgument("build_channel_index: empty channel set");
  if (keys.rows() == 0) throw DimensionError("build_channel_index: empty key matrix");
  const std::size_t d = keys.cols();
  top_channels = std::min(top_channels, d);

  std::vector<double> magnitude(d, 0.0);
  for (std::size_t t = 0; t < keys.rows(); ++t) {
    auto row = keys.row(t);
    for (std::size_t c = 0; c < d; ++c) magnitude[c] += std::abs(row[c]);
  }
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return magnitude[a] > magnitude[b]; });
  order.resize(top_channels);
  std::sort(order.begin(), order.end());

  ChannelIndex index;
  index.reduced = Matrix<float>(keys.rows(), order.size());
  for (std::size_t t = 0; t < keys.rows(); ++t) {
    for (std::size_t j = 0; j < order.size(); ++j) index.reduced(t, j) = keys(t, order[j]);
  }
  index.channels = std::move(order);
  return index;
}

TokenSelection select_full(std::size_t n) { return TokenSelection::all(n); }

double quest_page_score(std::span<const float> q, const PageMetadata& page) {
  if (q.size() != page.min.size() || q.size() != page.max.size()) {
    throw DimensionError("quest_page_score: query length differs from metadata width");
  }
  double score = 0.0;
  for (std::size_t c = 0; c < q.size(); ++c) {
    const double qc = q[c];
    score += std::max(qc * page.min[c], qc * page.max[c]);
  }
  return score;
}

namespace {

// Indices of the `keep` largest scores, ties by lower index.
std::vector<std::size_t> top_indices(const std::vector<double>& scores, std::size_t keep) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  keep = std::min(keep, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
                    });
  order.resize(keep);
  return order;
}

}  // namespace

TokenSelection select_quest(std::span<const float> q, std::span<const PageMetadata> metadata,
                            std::size_t budget, std::size_t page_size) {
  if (metadata.empty()) throw InvalidArgument("select_quest: empty page metadata");
  if (page_size == 0) throw InvalidArgument("select_quest: page_size must be >= 1");
  const std::size_t n = metadata.back().first_token + metadata.back().token_count;
  const std::size_t pages = (budget + page_size - 1) / page_size;

  std::vector<double> scores;
  scores.reserve(metadata.size());
  for (const auto& page : metadata) scores.push_back(quest_page_score(q, page));

  std::vector<std::size_t> tokens;
  for (std::size_t p : top_indices(scores, pages)) {
    const auto& page = metadata[p];
    for (std::size_t t = 0; t < page.token_count; ++t) tokens.push_back(page.first_token + t);
  }
  return TokenSelection::from_indices(n, std::move(tokens));
}

TokenSelection select_channel_pruned(std::span<const float> q, const ChannelIndex& index,
                                     std::size_t budget) {
  if (index.channels.empty()) throw InvalidArgument("select_channel_pruned: empty channel set");
  const std::size_t n = index.reduced.rows();
  std::vector<double> scores(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    auto row = index.reduced.row(t);
    double s = 0.0;
    for (std::size_t j = 0; j < index.channels.size(); ++j) {
      const std::size_t c = index.channels[j];
      if (c >= q.size()) throw DimensionError("select_channel_pruned: channel id out of range");
      s += static_cast<double>(q[c]) * row[j];
    }
    scores[t] = s;
  }
  return TokenSelection::from_indices(n, top_indices(scores, budget));
}

TokenSelection select_sink_window(std::size_t n, std::size_t sink, std::size_t window) {
  if (sink + window >= n) return TokenSelection::all(n);
  std::vector<std::size_t> tokens;
  tokens.reserve(sink + window);
  for (std::size_t t = 0; t < sink; ++t) tokens.push_back(t);
  for (std::size_t t = n - window; t < n; ++t) tokens.push_back(t);
  return TokenSelection::from_indices(n, std::move(tokens));
}

TokenSelection group_union(std::span<const TokenSelection> selections) {
  if (selections.empty()) throw InvalidArgument("group_union: no selections");
  const std::size_t n = selections.front().context_length();
  std::vector<bool> mask(n, false);
  for (const auto& sel : selections) {
    if (sel.context_length() != n) {
      throw DimensionError("group_union: selections cover different context lengths");
    }
    for (std::size_t i : sel.indices()) mask[i] = true;
  }
  return TokenSelection::from_mask(std::move(mask));
}

TokenSelection run_selector(const SelectorConfig& config, const SelectorInputs& in) {
  config.validate();
  const std::size_t budget = config.budget.resolve(in.n);
  switch (config.kind) {
    case SelectorKind::full:
      return select_full(in.n);
    case SelectorKind::quest:
      if (in.metadata == nullptr) throw InvalidArgument("quest selector needs page metadata");
      return select_quest(in.q, *in.metadata, budget, config.page_size);
    case SelectorKind::channel_pruned:
      if (in.channels == nullptr) throw InvalidArgument("channel_pruned selector needs an index");
      return select_channel_pruned(in.q, *in.channels, budget);
    case SelectorKind::sink_window:
      return select_sink_window(in.n, config.sink, config.window);
  }
  throw InvalidArgument("unknown selector kind");
}

}  // namespace topp
