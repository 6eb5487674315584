// SPDX-License-Identifier: Apache-2.0

#include "topp/quant_cache.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace topp {

QuantBits quant_bits_from_int(int bits) {
  switch (bits) {
    case 2: return QuantBits::two;
    case 4: return QuantBits::four;
    case 8: return QuantBits::eight;
    default:
      throw InvalidArgument("unsupported quantization width " + std::to_string(bits) +
                            " (expected 2, 4 or 8)");
  }
}

QuantizedRow quantize_row(std::span<const float> key, QuantBits bits) {
  if (key.empty()) throw DimensionError("quantize_row: empty row");
  for (float x : key) {
    if (!std::isfinite(x)) throw NonFiniteError("quantize_row: non-finite key element");
  }
  const auto [lo_it, hi_it] = std::minmax_element(key.begin(), key.end());
  const float lo = *lo_it;
  const float hi = *hi_it;
  const int top = max_code(bits);

  QuantizedRow out;
  out.codes.assign(key.size(), 0);
  out.params.zero = lo;
  if (hi == lo) {
    out.params.scale = 0.0f;
    return out;
  }
  out.params.scale = static_cast<float>((static_cast<double>(hi) - lo) / top);
  const double zero = out.params.zero;
  const double scale = out.params.scale;
  for (std::size_t i = 0; i < key.size(); ++i) {
    const double code = std::nearbyint((key[i] - zero) / scale);
    out.codes[i] = static_cast<std::uint8_t>(std::clamp(code, 0.0, static_cast<double>(top)));
  }
  return out;
}

std::vector<std::uint8_t> pack_codes(std::span<const std::uint8_t> codes, QuantBits bits) {
  const std::size_t per_byte = codes_per_byte(bits);
  if (codes.size() % per_byte != 0) {
    throw DimensionError("pack_codes: " + std::to_string(codes.size()) +
                         " codes is not a multiple of " + std::to_string(per_byte));
  }
  const int width = bit_count(bits);
  const int top = max_code(bits);
  std::vector<std::uint8_t> packed(codes.size() / per_byte, 0);
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i] > top) {
      throw InvalidArgument("pack_codes: code " + std::to_string(codes[i]) + " exceeds " +
                            std::to_string(top));
    }
    const int shift = static_cast<int>(i % per_byte) * width;
    packed[i / per_byte] = static_cast<std::uint8_t>(packed[i / per_byte] | (codes[i] << shift));
  }
  return packed;
}

std::vector<std::uint8_t> unpack_codes(std::span<const std::uint8_t> packed, std::size_t count,
                                       QuantBits bits) {
  const std::size_t per_byte = codes_per_byte(bits);
  if (count % per_byte != 0 || count / per_byte > packed.size()) {
    throw DimensionError("unpack_codes: buffer too short or count misaligned");
  }
  const int width = bit_count(bits);
  const auto mask = static_cast<std::uint8_t>(max_code(bits));
  std::vector<std::uint8_t> codes(count);
  for (std::size_t i = 0; i < count; ++i) {
    const int shift = static_cast<int>(i % per_byte) * width;
    codes[i] = static_cast<std::uint8_t>((packed[i / per_byte] >> shift) & mask);
  }
  return codes;
}

// PagedQuantKeyCache --------------------------------------------------------

PagedQuantKeyCache::PagedQuantKeyCache(std::size_t head_dim, std::size_t page_size,
                                       QuantBits bits)
    : head_dim_(head_dim), page_size_(page_size), bits_(bits) {
  if (head_dim_ == 0) throw DimensionError("PagedQuantKeyCache: head_dim must be >= 1");
  if (page_size_ == 0) throw InvalidArgument("PagedQuantKeyCache: page_size must be >= 1");
  if (head_dim_ % codes_per_byte(bits_) != 0) {
    throw DimensionError("PagedQuantKeyCache: head_dim " + std::to_string(head_dim_) +
                         " cannot be packed at " + std::to_string(bit_count(bits_)) + " bits");
  }
}

PagedQuantKeyCache::PagedQuantKeyCache(std::size_t head_dim, std::size_t page_size,
                                       QuantBits bits, std::vector<QuantPage> pages,
                                       std::vector<std::size_t> page_table)
    : PagedQuantKeyCache(head_dim, page_size, bits) {
  if (pages.size() != page_table.size()) {
    throw InvalidArgument("PagedQuantKeyCache: page table must reference every page once");
  }
  std::vector<bool> seen(pages.size(), false);
  for (std::size_t slot = 0; slot < page_table.size(); ++slot) {
    const std::size_t id = page_table[slot];
    if (id >= pages.size() || seen[id]) {
      throw InvalidArgument("PagedQuantKeyCache: page table must reference every page once");
    }
    seen[id] = true;
    const QuantPage& page = pages[id];
    if (page.packed.size() != page_size_ * row_bytes() || page.params.size() != page_size_ ||
        page.valid_len > page_size_) {
      throw DimensionError("PagedQuantKeyCache: page buffer sizes do not match layout");
    }
    const bool last = slot + 1 == page_table.size();
    if (!last && page.valid_len != page_size_) {
      throw InvalidArgument("PagedQuantKeyCache: only the last page may be partially filled");
    }
    n_tokens_ += page.valid_len;
  }
  pages_ = std::move(pages);
  page_table_ = std::move(page_table);
}

std::size_t PagedQuantKeyCache::row_bytes() const noexcept {
  return head_dim_ / static_cast<std::size_t>(codes_per_byte(bits_));
}

void PagedQuantKeyCache::append(std::span<const float> key) {
  if (key.size() != head_dim_) {
    throw DimensionError("PagedQuantKeyCache::append: row length differs from head_dim");
  }
  if (page_table_.empty() || pages_[page_table_.back()].valid_len == page_size_) {
    QuantPage page;
    page.packed.assign(page_size_ * row_bytes(), 0);
    page.params.assign(page_size_, QuantParams{});
    pages_.push_back(std::move(page));
    page_table_.push_back(pages_.size() - 1);
  }
  QuantPage& page = pages_[page_table_.back()];
  const auto row = quantize_row(key, bits_);
  const auto packed = pack_codes(row.codes, bits_);
  std::copy(packed.begin(), packed.end(),
            page.packed.begin() + static_cast<std::ptrdiff_t>(page.valid_len * row_bytes()));
  page.params[page.valid_len] = row.params;
  ++page.valid_len;
  ++n_tokens_;
}

std::pair<std::size_t, std::size_t> PagedQuantKeyCache::locate(std::size_t t) const {
  if (t >= n_tokens_) {
    throw InvalidArgument("PagedQuantKeyCache: token " + std::to_string(t) + " out of range");
  }
  return {page_table_[t / page_size_], t % page_size_};
}

std::span<const std::uint8_t> PagedQuantKeyCache::packed_row(std::size_t t) const {
  const auto [page, row] = locate(t);
  return std::span<const std::uint8_t>(pages_[page].packed).subspan(row * row_bytes(), row_bytes());
}

QuantParams PagedQuantKeyCache::params(std::size_t t) const {
  const auto [page, row] = locate(t);
  return pages_[page].params[row];
}

std::vector<float> PagedQuantKeyCache::dequantize_row(std::size_t t) const {
  const auto codes = unpack_codes(packed_row(t), head_dim_, bits_);
  const QuantParams p = params(t);
  std::vector<float> out(head_dim_);
  for (std::size_t c = 0; c < head_dim_; ++c) out[c] = p.dequantize(codes[c]);
  return out;
}

// Build ---------------------------------------------------------------------

std::vector<PageMetadata> build_page_metadata(const Matrix<float>& keys, std::size_t page_size) {
  if (keys.rows() == 0) throw DimensionError("build_page_metadata: empty key matrix");
  if (page_size == 0) throw InvalidArgument("build_page_metadata: page_size must be >= 1");
  std::vector<PageMetadata> meta;
  for (std::size_t first = 0; first < keys.rows(); first += page_size) {
    PageMetadata m;
    m.first_token = first;
    m.token_count = std::min(page_size, keys.rows() - first);
    auto row0 = keys.row(first);
    m.min.assign(row0.begin(), row0.end());
    m.max.assign(row0.begin(), row0.end());
    for (std::size_t t = first + 1; t < first + m.token_count; ++t) {
      auto row = keys.row(t);
      for (std::size_t c = 0; c < keys.cols(); ++c) {
        m.min[c] = std::min(m.min[c], row[c]);
        m.max[c] = std::max(m.max[c], row[c]);
      }
    }
    meta.push_back(std::move(m));
  }
  return meta;
}

BuiltCache build_cache(const Matrix<float>& keys, std::size_t page_size, QuantBits bits) {
  if (keys.rows() == 0) throw DimensionError("build_cache: empty key matrix");
  PagedQuantKeyCache cache(keys.cols(), page_size, bits);
  for (std::size_t t = 0; t < keys.rows(); ++t) cache.append(keys.row(t));
  return {std::move(cache), build_page_metadata(keys, page_size)};
}

// Estimation ----------------------------------------------------------------

ScoreEstimate estimate_scores(std::span<const float> q, const PagedQuantKeyCache& cache,
                              const TokenSelection& candidates) {
  const std::size_t d = cache.head_dim();
  if (q.size() != d) throw DimensionError("estimate_scores: query length differs from head_dim");
  if (candidates.context_length() != cache.size()) {
    throw DimensionError("estimate_scores: candidate context length differs from cache size");
  }
  double q_sum = 0.0;
  for (float x : q) q_sum += x;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  const QuantBits bits = cache.bits();
  const std::size_t per_byte = codes_per_byte(bits);
  const int width = bit_count(bits);
  const auto mask = static_cast<unsigned>(max_code(bits));

  ScoreEstimate est;
  est.logits.reserve(candidates.size());
  for (std::size_t t : candidates.indices()) {
    const auto packed = cache.packed_row(t);
    const QuantParams p = cache.params(t);
    double code_dot = 0.0;
    for (std::size_t b = 0; b < packed.size(); ++b) {
      unsigned byte = packed[b];
      for (std::size_t j = 0; j < per_byte; ++j) {
        code_dot += static_cast<double>(q[b * per_byte + j]) * static_cast<double>(byte & mask);
        byte >>= width;
      }
    }
    const double dot = static_cast<double>(p.zero) * q_sum + static_cast<double>(p.scale) * code_dot;
    est.logits.push_back(dot * inv_sqrt_d);
  }
  est.bytes_touched = candidates.size() * (cache.row_bytes() + kParamBytesPerRow);
  return est;
}

}  // namespace topp
