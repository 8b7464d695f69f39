#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace fenplan {

// 64-bit FNV-1a. Used for weight-blob checksums, config hashes, and RNG
// stream names.
class Fnv1a64 {
 public:
  static constexpr std::uint64_t kOffset = 0xcbf29ce484222325ULL;
  static constexpr std::uint64_t kPrime = 0x100000001b3ULL;

  void update(std::span<const std::byte> bytes) noexcept;
  void update(std::string_view text) noexcept;
  std::uint64_t digest() const noexcept { return state_; }

 private:
  std::uint64_t state_ = kOffset;
};

std::uint64_t fnv1a64(std::span<const std::byte> bytes) noexcept;
std::uint64_t fnv1a64(std::string_view text) noexcept;

// Hash of a whole file; throws IoError if it cannot be read.
std::uint64_t file_checksum(const std::filesystem::path& path);

std::string to_hex(std::uint64_t value);
// Throws FormatError on anything but 1..16 hex digits.
std::uint64_t parse_hex(std::string_view text);

}  // namespace fenplan
