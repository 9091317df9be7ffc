#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "spfu/tensor.hpp"

// On-disk tensor layout, all fields little-endian, no padding:
//
//   offset  size  field
//   0       4     magic "SPFU"
//   4       2     format version (u16) = 1
//   6       1     dtype (u8), 0 = f32
//   7       1     rank (u8) = 4
//   8       16    dims C, T, H, W (u32 each)
//   24      4*N   payload, N = C*T*H*W f32 values, row-major with W fastest

namespace spfu {

class FormatError : public Error {
 public:
  using Error::Error;
};
class BadMagic : public FormatError {
 public:
  using FormatError::FormatError;
};
class TruncatedPayload : public FormatError {
 public:
  using FormatError::FormatError;
};
class NonFinitePayload : public FormatError {
 public:
  using FormatError::FormatError;
};

inline constexpr std::array<char, 4> kTensorMagic = {'S', 'P', 'F', 'U'};
inline constexpr std::uint16_t kTensorFormatVersion = 1;
inline constexpr std::uint8_t kDtypeF32 = 0;
inline constexpr std::size_t kTensorHeaderSize = 24;

namespace detail {

inline void put_le(std::vector<std::uint8_t>& out, std::uint64_t value, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

inline std::uint64_t get_le(const std::uint8_t* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_tensor(const VideoLatent& latent) {
  const Shape& s = latent.shape();
  std::vector<std::uint8_t> out;
  out.reserve(kTensorHeaderSize + 4 * latent.size());
  out.insert(out.end(), kTensorMagic.begin(), kTensorMagic.end());
  detail::put_le(out, kTensorFormatVersion, 2);
  detail::put_le(out, kDtypeF32, 1);
  detail::put_le(out, 4, 1);
  for (std::size_t d : {s.channels, s.frames, s.height, s.width}) {
    if (d > UINT32_MAX) throw InvalidShape("axis too large for the tensor format");
    detail::put_le(out, d, 4);
  }
  for (float v : latent.data()) detail::put_le(out, std::bit_cast<std::uint32_t>(v), 4);
  return out;
}

inline VideoLatent decode_tensor(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kTensorMagic.data(), 4) != 0)
    throw BadMagic("not an SPFU tensor file (bad magic)");
  if (bytes.size() < kTensorHeaderSize) throw TruncatedPayload("tensor header truncated");
  const std::uint8_t* p = bytes.data();
  const auto version = detail::get_le(p + 4, 2);
  if (version != kTensorFormatVersion)
    throw FormatError("unsupported tensor format version " + std::to_string(version));
  if (p[6] != kDtypeF32) throw FormatError("unsupported dtype " + std::to_string(p[6]));
  if (p[7] != 4) throw FormatError("unsupported rank " + std::to_string(p[7]));
  Shape s{detail::get_le(p + 8, 4), detail::get_le(p + 12, 4), detail::get_le(p + 16, 4),
          detail::get_le(p + 20, 4)};
  if (!s.valid()) throw InvalidShape("tensor file declares shape " + to_string(s));

  const std::size_t n = s.size();
  const std::size_t payload = bytes.size() - kTensorHeaderSize;
  if (payload < 4 * n)
    throw TruncatedPayload("payload holds " + std::to_string(payload / 4) + " values, header declares " +
                           std::to_string(n));
  if (payload > 4 * n) throw FormatError("trailing bytes after tensor payload");

  std::vector<float> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    data[i] = std::bit_cast<float>(static_cast<std::uint32_t>(detail::get_le(p + kTensorHeaderSize + 4 * i, 4)));
    if (!std::isfinite(data[i]))
      throw NonFinitePayload("non-finite value at element " + std::to_string(i));
  }
  return VideoLatent(s, std::move(data));
}

inline void write_tensor(const std::filesystem::path& path, const VideoLatent& latent) {
  const auto bytes = encode_tensor(latent);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("write failed: " + path.string());
}

inline VideoLatent read_tensor(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_tensor(bytes);
}

}  // namespace spfu
