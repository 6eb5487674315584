// SPDX-License-Identifier: Apache-2.0

#include "topp/tensor_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

namespace topp {
namespace {

constexpr std::array<char, 4> kMagic{'T', 'W', 'L', 'T'};
constexpr std::size_t kFixedHeader = 4 + 4 + 4;

template <typename U>
void put_le(std::vector<std::byte>& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<std::byte>((value >> (8 * i)) & 0xFF));
  }
}

template <typename U>
U get_le(std::span<const std::byte> in, std::size_t offset) {
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    value |= static_cast<U>(std::to_integer<unsigned>(in[offset + i])) << (8 * i);
  }
  return value;
}

// Element count of `dims`, or throws dim_overflow when the payload size would
// not fit in size_t.
std::uint64_t element_count(std::span<const std::uint64_t> dims) {
  std::uint64_t count = 1;
  const std::uint64_t limit = std::numeric_limits<std::size_t>::max() / sizeof(float);
  for (std::uint64_t d : dims) {
    if (d != 0 && count > limit / d) {
      throw TensorIoError(TensorErrc::dim_overflow, "tensor: dimensions overflow payload size");
    }
    count *= d;
  }
  return count;
}

}  // namespace

const char* to_string(TensorErrc code) noexcept {
  switch (code) {
    case TensorErrc::io_failure: return "io_failure";
    case TensorErrc::bad_magic: return "bad_magic";
    case TensorErrc::version_mismatch: return "version_mismatch";
    case TensorErrc::truncated: return "truncated";
    case TensorErrc::dim_overflow: return "dim_overflow";
    case TensorErrc::shape_mismatch: return "shape_mismatch";
  }
  return "unknown";
}

std::vector<std::byte> encode_tensor(const Tensor& tensor) {
  if (element_count(tensor.dims) != tensor.data.size()) {
    throw TensorIoError(TensorErrc::shape_mismatch, "tensor: dims do not match data length");
  }
  std::vector<std::byte> out;
  out.reserve(kFixedHeader + 8 * tensor.dims.size() + 4 * tensor.data.size());
  for (char c : kMagic) out.push_back(static_cast<std::byte>(c));
  put_le<std::uint32_t>(out, kTensorFormatVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.dims.size()));
  for (std::uint64_t d : tensor.dims) put_le<std::uint64_t>(out, d);
  for (float x : tensor.data) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(x));
  return out;
}

Tensor decode_tensor(std::span<const std::byte> bytes) {
  if (bytes.size() < kMagic.size()) {
    throw TensorIoError(TensorErrc::truncated, "tensor: file shorter than its magic");
  }
  for (std::size_t i = 0; i < kMagic.size(); ++i) {
    if (bytes[i] != static_cast<std::byte>(kMagic[i])) {
      throw TensorIoError(TensorErrc::bad_magic, "tensor: bad magic (expected TWLT)");
    }
  }
  if (bytes.size() < kFixedHeader) {
    throw TensorIoError(TensorErrc::truncated, "tensor: header truncated");
  }
  const auto version = get_le<std::uint32_t>(bytes, 4);
  if (version != kTensorFormatVersion) {
    throw TensorIoError(TensorErrc::version_mismatch,
                        "tensor: unsupported version " + std::to_string(version));
  }
  const auto rank = get_le<std::uint32_t>(bytes, 8);
  if ((bytes.size() - kFixedHeader) / 8 < rank) {
    throw TensorIoError(TensorErrc::truncated, "tensor: dimension table truncated");
  }
  Tensor t;
  t.dims.resize(rank);
  for (std::uint32_t i = 0; i < rank; ++i) {
    t.dims[i] = get_le<std::uint64_t>(bytes, kFixedHeader + 8 * i);
  }
  const std::uint64_t count = element_count(t.dims);
  const std::size_t payload_offset = kFixedHeader + 8 * static_cast<std::size_t>(rank);
  if (bytes.size() - payload_offset != count * sizeof(float)) {
    throw TensorIoError(TensorErrc::truncated,
                        "tensor: payload holds " + std::to_string(bytes.size() - payload_offset) +
                            " bytes, header implies " + std::to_string(count * sizeof(float)));
  }
  t.data.resize(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    t.data[i] = std::bit_cast<float>(get_le<std::uint32_t>(bytes, payload_offset + 4 * i));
  }
  return t;
}

void write_tensor(const std::filesystem::path& path, const Tensor& tensor) {
  const auto bytes = encode_tensor(tensor);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw TensorIoError(TensorErrc::io_failure, "tensor: cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw TensorIoError(TensorErrc::io_failure, "tensor: write failed for " + path.string());
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TensorIoError(TensorErrc::io_failure, "tensor: cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw TensorIoError(TensorErrc::io_failure, "tensor: read failed for " + path.string());
  return decode_tensor(std::as_bytes(std::span<const char>(raw)));
}

Tensor to_tensor(const Matrix<float>& m) {
  Tensor t;
  t.dims = {m.rows(), m.cols()};
  t.data.assign(m.flat().begin(), m.flat().end());
  return t;
}

Matrix<float> to_matrix(const Tensor& t) {
  if (t.dims.size() == 1) return Matrix<float>(1, t.dims[0], t.data);
  if (t.dims.size() != 2) {
    throw TensorIoError(TensorErrc::shape_mismatch,
                        "tensor: expected rank 1 or 2, got rank " + std::to_string(t.dims.size()));
  }
  return Matrix<float>(t.dims[0], t.dims[1], t.data);
}

}  // namespace topp
