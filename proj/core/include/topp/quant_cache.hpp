// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "topp/attention.hpp"
#include "topp/matrix.hpp"

namespace topp {

/// Supported code widths for the estimator cache. 4 is the production choice;
/// 2 and 8 exist for precision sweeps.
enum class QuantBits : int { two = 2, four = 4, eight = 8 };

[[nodiscard]] constexpr int bit_count(QuantBits b) noexcept { return static_cast<int>(b); }
[[nodiscard]] constexpr int max_code(QuantBits b) noexcept { return (1 << bit_count(b)) - 1; }
[[nodiscard]] constexpr int codes_per_byte(QuantBits b) noexcept { return 8 / bit_count(b); }

/// Throws InvalidArgument for widths other than 2, 4, 8.
[[nodiscard]] QuantBits quant_bits_from_int(int bits);

/// Asymmetric dequantization parameters for one key row: value = zero + scale * code.
struct QuantParams {
  float scale = 0.0f;
  float zero = 0.0f;

  [[nodiscard]] float dequantize(std::uint8_t code) const noexcept {
    return zero + scale * static_cast<float>(code);
  }
  friend bool operator==(const QuantParams&, const QuantParams&) = default;
};

/// Modeled size of one row's parameters: FP16 scale + FP16 zero.
inline constexpr std::size_t kParamBytesPerRow = 4;

struct QuantizedRow {
  std::vector<std::uint8_t> codes;
  QuantParams params;
};

/// scale = (max - min) / (2^bits - 1), zero = min, code = round((k - min) / scale).
/// A constant row stores scale 0 and codes 0, which dequantizes exactly.
[[nodiscard]] QuantizedRow quantize_row(std::span<const float> key,
                                        QuantBits bits = QuantBits::four);

/// Packs codes LSB-first: for 4 bits, byte b holds codes[2b] in the low nibble
/// and codes[2b+1] in the high nibble. The code count must be a multiple of
/// codes_per_byte(bits).
[[nodiscard]] std::vector<std::uint8_t> pack_codes(std::span<const std::uint8_t> codes,
                                                   QuantBits bits = QuantBits::four);
[[nodiscard]] std::vector<std::uint8_t> unpack_codes(std::span<const std::uint8_t> packed,
                                                     std::size_t count,
                                                     QuantBits bits = QuantBits::four);

/// A fixed-capacity block of consecutive token rows.
struct QuantPage {
  std::vector<std::uint8_t> packed;  ///< capacity * row_bytes, zero padded
  std::vector<QuantParams> params;   ///< one per row, capacity entries
  std::size_t valid_len = 0;
};

/// Full-precision per-channel bounds of the rows stored in one page.
struct PageMetadata {
  std::size_t first_token = 0;
  std::size_t token_count = 0;
  std::vector<float> min;
  std::vector<float> max;
};

/// INT-n quantized key cache in fixed-size pages addressed through a page
/// table. Page ids in the table appear in token order.
///
/// Not synchronized: concurrent reads are fine once built, but append() must
/// not race with readers.
class PagedQuantKeyCache {
 public:
  PagedQuantKeyCache(std::size_t head_dim, std::size_t page_size,
                     QuantBits bits = QuantBits::four);

  /// Adopts existing pages. Validates that the table is a permutation of the
  /// page ids, that every page but the last in table order is full, and that
  /// buffer sizes match.
  PagedQuantKeyCache(std::size_t head_dim, std::size_t page_size, QuantBits bits,
                     std::vector<QuantPage> pages, std::vector<std::size_t> page_table);

  /// Quantizes and stores one key row at position size().
  void append(std::span<const float> key);

  [[nodiscard]] std::size_t size() const noexcept { return n_tokens_; }
  [[nodiscard]] std::size_t head_dim() const noexcept { return head_dim_; }
  [[nodiscard]] std::size_t page_size() const noexcept { return page_size_; }
  [[nodiscard]] QuantBits bits() const noexcept { return bits_; }
  [[nodiscard]] std::size_t row_bytes() const noexcept;
  [[nodiscard]] const std::vector<QuantPage>& pages() const noexcept { return pages_; }
  [[nodiscard]] const std::vector<std::size_t>& page_table() const noexcept { return page_table_; }

  /// Physical page and row holding token `t`.
  [[nodiscard]] std::pair<std::size_t, std::size_t> locate(std::size_t t) const;

  [[nodiscard]] std::span<const std::uint8_t> packed_row(std::size_t t) const;
  [[nodiscard]] QuantParams params(std::size_t t) const;
  [[nodiscard]] std::vector<float> dequantize_row(std::size_t t) const;

 private:
  std::size_t head_dim_;
  std::size_t page_size_;
  QuantBits bits_;
  std::size_t n_tokens_ = 0;
  std::vector<QuantPage> pages_;
  std::vector<std::size_t> page_table_;
};

struct BuiltCache {
  PagedQuantKeyCache cache;
  std::vector<PageMetadata> metadata;
};

/// Pages the key matrix in token order and records per-page channel bounds.
[[nodiscard]] BuiltCache build_cache(const Matrix<float>& keys, std::size_t page_size,
                                     QuantBits bits = QuantBits::four);

/// Per-page bounds computed from the full-precision keys.
[[nodiscard]] std::vector<PageMetadata> build_page_metadata(const Matrix<float>& keys,
                                                            std::size_t page_size);

struct ScoreEstimate {
  std::vector<double> logits;     ///< one per candidate, in candidate order
  std::size_t bytes_touched = 0;  ///< packed codes + modeled parameter bytes
};

/// q . dequant(k_t) / sqrt(d) for every candidate token t.
[[nodiscard]] ScoreEstimate estimate_scores(std::span<const float> q,
                                            const PagedQuantKeyCache& cache,
                                            const TokenSelection& candidates);

}  // namespace topp
