#include "fenplan/checksum.hpp"

#include <array>
#include <charconv>
#include <fstream>

#include "fenplan/error.hpp"

namespace fenplan {

void Fnv1a64::update(std::span<const std::byte> bytes) noexcept {
  for (std::byte b : bytes) {
    state_ ^= static_cast<std::uint64_t>(b);
    state_ *= kPrime;
  }
}

void Fnv1a64::update(std::string_view text) noexcept {
  update(std::as_bytes(std::span(text.data(), text.size())));
}

std::uint64_t fnv1a64(std::span<const std::byte> bytes) noexcept {
  Fnv1a64 h;
  h.update(bytes);
  return h.digest();
}

std::uint64_t fnv1a64(std::string_view text) noexcept {
  Fnv1a64 h;
  h.update(text);
  return h.digest();
}

std::uint64_t file_checksum(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Fnv1a64 h;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    const auto got = static_cast<std::size_t>(in.gcount());
    h.update(std::as_bytes(std::span(buf.data(), got)));
  }
  if (in.bad()) throw IoError("read failure on " + path.string());
  return h.digest();
}

std::string to_hex(std::uint64_t value) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[value & 0xf];
    value >>= 4;
  }
  return out;
}

std::uint64_t parse_hex(std::string_view text) {
  if (text.starts_with("0x")) text.remove_prefix(2);
  std::uint64_t value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value, 16);
  if (text.empty() || text.size() > 16 || ec != std::errc{} || ptr != end) {
    throw FormatError("not a 64-bit hex value: '" + std::string(text) + "'");
  }
  return value;
}

int exit_code_for(const std::exception& e) noexcept {
  if (dynamic_cast<const InfeasibleError*>(&e)) return 2;
  if (dynamic_cast<const NumericError*>(&e)) return 3;
  return 1;
}

}  // namespace fenplan
