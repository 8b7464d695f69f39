#include "fenplan/representations.hpp"

#include <cstring>
#include <limits>

#include "binary_io.hpp"
#include "fenplan/checksum.hpp"
#include "fenplan/csv.hpp"
#include "fenplan/error.hpp"
#include "file_util.hpp"

namespace fenplan {

namespace {

constexpr char kMagic[8] = {'F', 'E', 'N', 'R', 'E', 'P', 'S', '\0'};
constexpr std::uint32_t kVersion = 1;

std::uint32_t narrow_u32(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) throw DimensionError(std::string(what) + " too large");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::vector<std::byte> encode_representations(const FeatureTensor& reps, std::uint64_t config_hash) {
  reps.require_finite("representations");
  std::vector<std::byte> out;
  out.reserve(kRepresentationHeaderBytes + 4 * reps.shape().size());
  const auto* m = reinterpret_cast<const std::byte*>(kMagic);
  out.insert(out.end(), m, m + sizeof(kMagic));
  detail::put_u32(out, kVersion);
  detail::put_u64(out, reps.n());
  detail::put_u32(out, narrow_u32(reps.c(), "depth"));
  detail::put_u32(out, narrow_u32(reps.h(), "height"));
  detail::put_u32(out, narrow_u32(reps.w(), "width"));
  detail::put_u64(out, config_hash);
  for (double v : reps.data()) detail::put_f32(out, static_cast<float>(v));
  return out;
}

StoredRepresentations decode_representations(std::span<const std::byte> bytes,
                                             std::optional<std::uint64_t> expected_hash) {
  if (bytes.size() < kRepresentationHeaderBytes) throw FormatError("representations file is truncated");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) throw FormatError("not a representations file");
  const std::uint32_t version = detail::get_u32(bytes, 8);
  if (version != kVersion) throw FormatError("unsupported representations version " + std::to_string(version));
  const std::uint64_t n = detail::get_u64(bytes, 12);
  const std::size_t c = detail::get_u32(bytes, 20);
  const std::size_t h = detail::get_u32(bytes, 24);
  const std::size_t w = detail::get_u32(bytes, 28);
  StoredRepresentations out;
  out.config_hash = detail::get_u64(bytes, 32);
  if (expected_hash && *expected_hash != out.config_hash) {
    throw ConfigError("representations were produced by config " + to_hex(out.config_hash) + ", expected " +
                      to_hex(*expected_hash));
  }
  const Shape4 shape{static_cast<std::size_t>(n), c, h, w};
  const std::size_t per = c * h * w;
  if (per != 0 && n > (bytes.size() - kRepresentationHeaderBytes) / (4 * per)) {
    throw FormatError("representations payload is shorter than its header declares");
  }
  if (bytes.size() != kRepresentationHeaderBytes + 4 * shape.size()) {
    throw FormatError("representations payload size disagrees with its header");
  }
  std::vector<double> data(shape.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = detail::get_f32(bytes, kRepresentationHeaderBytes + 4 * i);
  }
  out.reps = FeatureTensor(shape, std::move(data));
  out.reps.require_finite("stored representations");
  return out;
}

void write_representations(const std::filesystem::path& path, const FeatureTensor& reps,
                           std::uint64_t config_hash) {
  detail::write_bytes(path, encode_representations(reps, config_hash));
}

StoredRepresentations read_representations(const std::filesystem::path& path,
                                           std::optional<std::uint64_t> expected_hash) {
  return decode_representations(detail::read_bytes(path), expected_hash);
}

std::string labels_to_csv(std::span<const int> labels) {
  std::string out = "index,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out += std::to_string(i) + "," + std::to_string(labels[i]) + "\n";
  }
  return out;
}

std::vector<int> labels_from_csv(std::string_view text) {
  const auto rows = parse_csv(text);
  if (rows.empty() || rows[0] != std::vector<std::string>{"index", "label"}) {
    throw FormatError("labels CSV must start with the header index,label");
  }
  std::vector<int> labels;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != 2) throw FormatError("labels CSV row " + std::to_string(r) + " needs 2 fields");
    if (parse_number(rows[r][0]) != static_cast<double>(r - 1)) {
      throw FormatError("labels CSV row " + std::to_string(r) + " is out of order");
    }
    const double v = parse_number(rows[r][1]);
    if (v < 0 || v != static_cast<double>(static_cast<int>(v))) {
      throw FormatError("labels CSV row " + std::to_string(r) + " has a non-integer label");
    }
    labels.push_back(static_cast<int>(v));
  }
  return labels;
}

}  // namespace fenplan
