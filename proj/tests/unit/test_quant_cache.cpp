// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "topp/attention.hpp"
#include "topp/errors.hpp"
#include "topp/quant_cache.hpp"

namespace topp {
namespace {

Matrix<float> gaussian_keys(std::size_t n, std::size_t d, std::mt19937_64& rng) {
  return testing::gaussian_matrix(n, d, rng).cast<float>();
}

TEST(QuantizeRow, ConstantRowIsExact) {
  const std::vector<float> k(8, 2.75f);
  for (auto bits : {QuantBits::two, QuantBits::four, QuantBits::eight}) {
    const auto q = quantize_row(k, bits);
    EXPECT_EQ(q.params.scale, 0.0f);
    for (auto c : q.codes) EXPECT_EQ(c, 0);
    for (auto c : q.codes) EXPECT_EQ(q.params.dequantize(c), 2.75f);
  }
}

TEST(QuantizeRow, LatticeAlignedRow) {
  const std::vector<float> k{0.0f, 15.0f};
  const auto q = quantize_row(k, QuantBits::four);
  EXPECT_EQ(q.params.scale, 1.0f);
  EXPECT_EQ(q.params.zero, 0.0f);
  EXPECT_EQ(q.codes, (std::vector<std::uint8_t>{0, 15}));
  EXPECT_EQ(q.params.dequantize(q.codes[1]), 15.0f);
}

TEST(QuantizeRow, RejectsBadInput) {
  const std::vector<float> k{1.0f, NAN};
  EXPECT_THROW((void)quantize_row(k), NonFiniteError);
  EXPECT_THROW((void)quantize_row(std::vector<float>{}), DimensionError);
  EXPECT_THROW((void)quant_bits_from_int(3), InvalidArgument);
  EXPECT_EQ(quant_bits_from_int(8), QuantBits::eight);
}

TEST(QuantizeRow, RoundtripWithinHalfStep) {
  std::mt19937_64 rng(61);
  for (auto bits : {QuantBits::two, QuantBits::four, QuantBits::eight}) {
    for (int rep = 0; rep < 500; ++rep) {
      const auto row = testing::to_float(testing::gaussian_vector(128, rng));
      const auto q = quantize_row(row, bits);
      for (std::size_t c = 0; c < row.size(); ++c) {
        ASSERT_LE(q.codes[c], max_code(bits));
        const float err = std::abs(row[c] - q.params.dequantize(q.codes[c]));
        ASSERT_LE(err, q.params.scale / 2.0f + 1e-6f);
      }
    }
  }
}

TEST(PackCodes, NibbleLayout) {
  const std::vector<std::uint8_t> codes{0, 15};
  EXPECT_EQ(pack_codes(codes), (std::vector<std::uint8_t>{0xF0}));
  const std::vector<std::uint8_t> two{1, 2, 3, 0};
  EXPECT_EQ(pack_codes(two, QuantBits::two), (std::vector<std::uint8_t>{0b00111001}));
}

TEST(PackCodes, AllBytePatternsRoundtrip) {
  for (auto bits : {QuantBits::two, QuantBits::four, QuantBits::eight}) {
    const auto per = static_cast<std::size_t>(codes_per_byte(bits));
    for (int b = 0; b < 256; ++b) {
      const std::vector<std::uint8_t> byte{static_cast<std::uint8_t>(b)};
      const auto codes = unpack_codes(byte, per, bits);
      ASSERT_EQ(pack_codes(codes, bits), byte);
    }
  }
  for (int lo = 0; lo < 16; ++lo) {
    for (int hi = 0; hi < 16; ++hi) {
      const std::vector<std::uint8_t> codes{static_cast<std::uint8_t>(lo),
                                            static_cast<std::uint8_t>(hi)};
      const auto packed = pack_codes(codes);
      ASSERT_EQ(packed[0], static_cast<std::uint8_t>(lo | (hi << 4)));
      ASSERT_EQ(unpack_codes(packed, 2), codes);
    }
  }
}

TEST(PackCodes, RandomVectorsRoundtrip) {
  std::mt19937_64 rng(67);
  std::uniform_int_distribution<int> code(0, 15);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<std::uint8_t> codes(128);
    for (auto& c : codes) c = static_cast<std::uint8_t>(code(rng));
    ASSERT_EQ(unpack_codes(pack_codes(codes), codes.size()), codes);
  }
}

TEST(PackCodes, RejectsBadInput) {
  const std::vector<std::uint8_t> odd{1, 2, 3};
  EXPECT_THROW((void)pack_codes(odd), DimensionError);
  const std::vector<std::uint8_t> big{16, 0};
  EXPECT_THROW((void)pack_codes(big), InvalidArgument);
  const std::vector<std::uint8_t> packed{0x12};
  EXPECT_THROW((void)unpack_codes(packed, 4), DimensionError);
}

TEST(BuildCache, PageLayout) {
  std::mt19937_64 rng(71);
  const auto k16 = gaussian_keys(16, 8, rng);
  const auto one = build_cache(k16, 16);
  EXPECT_EQ(one.cache.pages().size(), 1u);
  EXPECT_EQ(one.cache.pages()[0].valid_len, 16u);
  EXPECT_EQ(one.metadata.size(), 1u);

  const auto k17 = gaussian_keys(17, 8, rng);
  const auto two = build_cache(k17, 16);
  ASSERT_EQ(two.cache.pages().size(), 2u);
  EXPECT_EQ(two.cache.pages()[0].valid_len, 16u);
  EXPECT_EQ(two.cache.pages()[1].valid_len, 1u);
  EXPECT_EQ(two.cache.size(), 17u);
  EXPECT_EQ(two.metadata[1].first_token, 16u);
  EXPECT_EQ(two.metadata[1].token_count, 1u);
  EXPECT_EQ(two.cache.locate(16), (std::pair<std::size_t, std::size_t>{1, 0}));
  EXPECT_THROW((void)two.cache.locate(17), InvalidArgument);
  EXPECT_EQ(two.cache.row_bytes(), 4u);

  EXPECT_THROW((void)build_cache(Matrix<float>(0, 8), 16), DimensionError);
  EXPECT_THROW((void)build_cache(k16, 0), InvalidArgument);
}

TEST(BuildCache, MetadataBoundsCoverRows) {
  std::mt19937_64 rng(73);
  const auto k = gaussian_keys(203, 16, rng);
  const auto meta = build_page_metadata(k, 16);
  ASSERT_EQ(meta.size(), 13u);
  for (const auto& page : meta) {
    for (std::size_t t = page.first_token; t < page.first_token + page.token_count; ++t) {
      for (std::size_t c = 0; c < 16; ++c) {
        EXPECT_LE(page.min[c], k(t, c));
        EXPECT_GE(page.max[c], k(t, c));
      }
    }
  }
}

TEST(BuildCache, DequantizeMatchesRowQuantizer) {
  std::mt19937_64 rng(79);
  const auto k = gaussian_keys(50, 32, rng);
  const auto built = build_cache(k, 16, QuantBits::four);
  for (std::size_t t = 0; t < 50; ++t) {
    const auto q = quantize_row(k.row(t), QuantBits::four);
    EXPECT_EQ(built.cache.params(t), q.params);
    const auto deq = built.cache.dequantize_row(t);
    for (std::size_t c = 0; c < 32; ++c) EXPECT_EQ(deq[c], q.params.dequantize(q.codes[c]));
  }
}

TEST(PagedCache, AppendMatchesBulkBuild) {
  std::mt19937_64 rng(83);
  const auto k = gaussian_keys(37, 8, rng);
  PagedQuantKeyCache cache(8, 8, QuantBits::four);
  for (std::size_t t = 0; t < 37; ++t) cache.append(k.row(t));
  const auto built = build_cache(k, 8, QuantBits::four);
  ASSERT_EQ(cache.size(), built.cache.size());
  for (std::size_t t = 0; t < 37; ++t) {
    EXPECT_EQ(cache.dequantize_row(t), built.cache.dequantize_row(t));
  }
  EXPECT_THROW(cache.append(std::vector<float>(7, 0.0f)), DimensionError);
}

TEST(PagedCache, AdoptsPermutedPageTable) {
  std::mt19937_64 rng(89);
  const auto k = gaussian_keys(20, 4, rng);
  const auto built = build_cache(k, 8, QuantBits::four);
  auto pages = built.cache.pages();
  // Physical order 2, 0, 1; logical order stays token order.
  std::vector<QuantPage> shuffled{pages[2], pages[0], pages[1]};
  PagedQuantKeyCache adopted(4, 8, QuantBits::four, shuffled, {1, 2, 0});
  for (std::size_t t = 0; t < 20; ++t) {
    EXPECT_EQ(adopted.dequantize_row(t), built.cache.dequantize_row(t));
  }
  EXPECT_EQ(adopted.locate(17).first, 0u);
  EXPECT_THROW(PagedQuantKeyCache(4, 8, QuantBits::four, shuffled, {1, 1, 0}), InvalidArgument);
  // A partial page that is not last in table order is invalid.
  EXPECT_THROW(PagedQuantKeyCache(4, 8, QuantBits::four, shuffled, {0, 1, 2}), InvalidArgument);
}

TEST(EstimateScores, LatticeAlignedRowsAreExact) {
  Matrix<float> k(4, 4);
  const float rows[4][4] = {{0, 15, 3, 7}, {1, 1, 16, 4}, {-2, 13, 0, 5}, {9, 9, 9, 9}};
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t c = 0; c < 4; ++c) k(i, c) = rows[i][c];
  }
  const auto built = build_cache(k, 2, QuantBits::four);
  const std::vector<float> q{0.5f, -1.0f, 0.25f, 2.0f};
  const auto est = estimate_scores(q, built.cache, TokenSelection::all(4));
  const auto exact = attention_logits<float>(q, k);
  ASSERT_EQ(est.logits.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(est.logits[i], exact[i], 1e-6);
}

TEST(EstimateScores, ConstantRows) {
  Matrix<float> k(3, 8, 0.0f);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t c = 0; c < 8; ++c) k(i, c) = 0.5f * static_cast<float>(i + 1);
  }
  const auto built = build_cache(k, 16);
  const std::vector<float> q{1, 2, 3, 4, -1, -2, 0, 1};
  const double qsum = 8.0;
  const auto est = estimate_scores(q, built.cache, TokenSelection::all(3));
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(est.logits[i], 0.5 * (i + 1) * qsum / std::sqrt(8.0), 1e-12);
  }
}

TEST(EstimateScores, CountsBytesAndChecksRange) {
  std::mt19937_64 rng(97);
  const auto k = gaussian_keys(64, 16, rng);
  const auto built = build_cache(k, 16, QuantBits::four);
  const auto q = testing::to_float(testing::gaussian_vector(16, rng));
  const auto sel = TokenSelection::from_indices(64, {1, 5, 9, 63});
  const auto est = estimate_scores(q, built.cache, sel);
  EXPECT_EQ(est.logits.size(), 4u);
  EXPECT_EQ(est.bytes_touched, 4u * (8u + kParamBytesPerRow));
  EXPECT_THROW((void)estimate_scores(q, built.cache, TokenSelection::all(65)), DimensionError);
}

TEST(EstimateScores, ErrorShrinksWithWidth) {
  std::mt19937_64 rng(101);
  const auto k = gaussian_keys(512, 64, rng);
  const auto q = testing::to_float(testing::gaussian_vector(64, rng));
  const auto exact = attention_logits<float>(q, k);
  double previous = INFINITY;
  for (auto bits : {QuantBits::two, QuantBits::four, QuantBits::eight}) {
    const auto built = build_cache(k, 16, bits);
    const auto est = estimate_scores(q, built.cache, TokenSelection::all(512));
    double err = 0.0;
    for (std::size_t i = 0; i < 512; ++i) err += std::abs(est.logits[i] - exact[i]);
    EXPECT_LT(err, previous);
    previous = err;
  }
}

}  // namespace
}  // namespace topp
