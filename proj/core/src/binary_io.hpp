#pragma once

// Little-endian encoding helpers shared by the weight and representation
// file formats.

#include <algorithm>
#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

namespace fenplan::detail {

template <typename T>
T byteswap_if_big(T value) noexcept {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<std::byte, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  } else {
    return value;
  }
}

inline void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
  v = byteswap_if_big(v);
  const auto* p = reinterpret_cast<const std::byte*>(&v);
  out.insert(out.end(), p, p + sizeof(v));
}

inline void put_u64(std::vector<std::byte>& out, std::uint64_t v) {
  v = byteswap_if_big(v);
  const auto* p = reinterpret_cast<const std::byte*>(&v);
  out.insert(out.end(), p, p + sizeof(v));
}

inline void put_f32(std::vector<std::byte>& out, float f) {
  put_u32(out, std::bit_cast<std::uint32_t>(f));
}

inline std::uint32_t get_u32(std::span<const std::byte> in, std::size_t offset) {
  std::uint32_t v;
  std::memcpy(&v, in.data() + offset, sizeof(v));
  return byteswap_if_big(v);
}

inline std::uint64_t get_u64(std::span<const std::byte> in, std::size_t offset) {
  std::uint64_t v;
  std::memcpy(&v, in.data() + offset, sizeof(v));
  return byteswap_if_big(v);
}

inline float get_f32(std::span<const std::byte> in, std::size_t offset) {
  return std::bit_cast<float>(get_u32(in, offset));
}

}  // namespace fenplan::detail
