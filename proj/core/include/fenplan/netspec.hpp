#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fenplan/tensor.hpp"

namespace fenplan {

enum class LayerKind { conv, maxpool, relu };

std::string_view to_string(LayerKind kind) noexcept;
// Throws FormatError for unknown names.
LayerKind parse_layer_kind(std::string_view name);

// One stage of a sequential network. `filters` is populated only for conv.
struct Layer {
  LayerKind kind = LayerKind::relu;
  FilterBank filters;

  bool is_conv() const noexcept { return kind == LayerKind::conv; }
  bool operator==(const Layer&) const = default;
};

struct InputShape {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  bool operator==(const InputShape&) const = default;
};

// A pre-trained sequential conv network, the source FENs are cut from.
struct PretrainedNet {
  std::string name;
  InputShape input;
  std::vector<Layer> layers;

  std::size_t conv_count() const noexcept;
  // Index into `layers` of each conv layer, in order.
  std::vector<std::size_t> conv_layer_indices() const;
  // Output channel counts of each conv layer, in order.
  std::vector<std::size_t> conv_widths() const;

  // Checks the channel chain, spatial arithmetic and weight finiteness.
  void validate() const;

  bool operator==(const PretrainedNet&) const = default;
};

// On-disk form: a JSON manifest plus a binary blob of little-endian float32.
// Each conv layer occupies [weights [out][in][kh][kw], bias[out]] in the blob
// at the byte offsets named in the manifest; the manifest also records the
// FNV-1a 64 checksum of the blob.
//
// Errors: IoError for missing/unreadable files, FormatError for malformed
// manifests, DimensionError when declared sizes disagree with the blob or the
// layer chain, ChecksumError on checksum mismatch, NonFiniteError on NaN/Inf
// weights.
PretrainedNet load_netspec(const std::filesystem::path& manifest_path);

// Writes the manifest and its blob (default: manifest path with extension
// ".bin"). Weights are stored as float32; values already representable in
// float32 round-trip bit-exactly.
void save_netspec(const PretrainedNet& net, const std::filesystem::path& manifest_path,
                  std::filesystem::path blob_path = {});

// The serialized float32 blob for `net`.
std::vector<std::byte> encode_weight_blob(const PretrainedNet& net);

// Checksum of the serialized blob; identifies a net in cache keys.
std::uint64_t net_checksum(const PretrainedNet& net);

}  // namespace fenplan
