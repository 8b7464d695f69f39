#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fenplan/tensor.hpp"

namespace fenplan {

// Released representations on disk. Little-endian layout:
//   "FENREPS\0"  magic (8 bytes)
//   u32 version (1)
//   u64 n, u32 D', u32 H', u32 W'
//   u64 config hash
//   n * D' * H' * W' float32 values, sample-major ([n][D'][H'][W']).
// Values are stored as float32; reading returns the float32-rounded values.
struct StoredRepresentations {
  FeatureTensor reps;
  std::uint64_t config_hash = 0;
};

inline constexpr std::size_t kRepresentationHeaderBytes = 8 + 4 + 8 + 4 + 4 + 4 + 8;

std::vector<std::byte> encode_representations(const FeatureTensor& reps, std::uint64_t config_hash);
// Throws FormatError on a bad magic, version or size, and ConfigError when
// expected_hash is given and differs from the stored hash.
StoredRepresentations decode_representations(std::span<const std::byte> bytes,
                                             std::optional<std::uint64_t> expected_hash = std::nullopt);

void write_representations(const std::filesystem::path& path, const FeatureTensor& reps,
                           std::uint64_t config_hash);
StoredRepresentations read_representations(const std::filesystem::path& path,
                                           std::optional<std::uint64_t> expected_hash = std::nullopt);

// Labels sidecar: "index,label" with a header row.
std::string labels_to_csv(std::span<const int> labels);
std::vector<int> labels_from_csv(std::string_view text);

}  // namespace fenplan
