// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "topp/errors.hpp"
#include "topp/matrix.hpp"

namespace topp {

/// On-disk tensor layout (all integers little-endian):
///
///   "TWLT" | u32 version (=1) | u32 rank | rank x u64 dims | f32 payload, row-major
inline constexpr std::uint32_t kTensorFormatVersion = 1;

struct Tensor {
  std::vector<std::uint64_t> dims;
  std::vector<float> data;

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

enum class TensorErrc {
  io_failure = 1,
  bad_magic,
  version_mismatch,
  truncated,
  dim_overflow,
  shape_mismatch,
};

[[nodiscard]] const char* to_string(TensorErrc code) noexcept;

class TensorIoError : public Error {
 public:
  TensorIoError(TensorErrc code, const std::string& what) : Error(what), code_(code) {}
  [[nodiscard]] TensorErrc code() const noexcept { return code_; }

 private:
  TensorErrc code_;
};

[[nodiscard]] std::vector<std::byte> encode_tensor(const Tensor& tensor);
[[nodiscard]] Tensor decode_tensor(std::span<const std::byte> bytes);

void write_tensor(const std::filesystem::path& path, const Tensor& tensor);
[[nodiscard]] Tensor read_tensor(const std::filesystem::path& path);

[[nodiscard]] Tensor to_tensor(const Matrix<float>& m);
/// Rank-2 tensor to matrix; a rank-1 tensor becomes a single row.
[[nodiscard]] Matrix<float> to_matrix(const Tensor& t);

}  // namespace topp
