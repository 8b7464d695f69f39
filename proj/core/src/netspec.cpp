#include "fenplan/netspec.hpp"

#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "fenplan/checksum.hpp"
#include "fenplan/error.hpp"
#include "file_util.hpp"

namespace fenplan {

namespace {

using nlohmann::json;

constexpr std::string_view kManifestFormat = "fenplan-netspec";
constexpr int kManifestVersion = 1;

std::size_t field(const json& j, const char* key, std::size_t layer) {
  if (!j.contains(key) || !j.at(key).is_number_unsigned()) {
    throw FormatError("layer " + std::to_string(layer) + ": missing or non-integer '" + key + "'");
  }
  return j.at(key).get<std::size_t>();
}

}  // namespace

std::string_view to_string(LayerKind kind) noexcept {
  switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::relu: return "relu";
  }
  return "?";
}

LayerKind parse_layer_kind(std::string_view name) {
  if (name == "conv") return LayerKind::conv;
  if (name == "maxpool") return LayerKind::maxpool;
  if (name == "relu") return LayerKind::relu;
  throw FormatError("unknown layer kind '" + std::string(name) + "'");
}

std::size_t PretrainedNet::conv_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.is_conv() ? 1 : 0;
  return n;
}

std::vector<std::size_t> PretrainedNet::conv_layer_indices() const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].is_conv()) idx.push_back(i);
  return idx;
}

std::vector<std::size_t> PretrainedNet::conv_widths() const {
  std::vector<std::size_t> widths;
  for (const auto& l : layers)
    if (l.is_conv()) widths.push_back(l.filters.out_channels);
  return widths;
}

void PretrainedNet::validate() const {
  if (input.channels == 0 || input.height == 0 || input.width == 0) {
    throw DimensionError("net '" + name + "': input shape has a zero dimension");
  }
  if (layers.empty() || !layers.front().is_conv()) {
    throw DimensionError("net '" + name + "': first layer must be a conv layer");
  }
  std::size_t c = input.channels, h = input.height, w = input.width;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    switch (l.kind) {
      case LayerKind::conv:
        if (l.filters.in_channels != c) {
          throw DimensionError("layer " + std::to_string(i) + ": conv expects " +
                               std::to_string(l.filters.in_channels) + " input channels, chain provides " +
                               std::to_string(c));
        }
        l.filters.validate();
        h = l.filters.out_h(h);
        w = l.filters.out_w(w);
        c = l.filters.out_channels;
        break;
      case LayerKind::maxpool:
        if (h % 2 != 0 || w % 2 != 0) {
          throw DimensionError("layer " + std::to_string(i) + ": maxpool on odd spatial dims " +
                               std::to_string(h) + "x" + std::to_string(w));
        }
        h /= 2;
        w /= 2;
        break;
      case LayerKind::relu:
        break;
    }
  }
}

std::vector<std::byte> encode_weight_blob(const PretrainedNet& net) {
  std::vector<std::byte> blob;
  for (const auto& l : net.layers) {
    if (!l.is_conv()) continue;
    for (double v : l.filters.weights) detail::put_f32(blob, static_cast<float>(v));
    for (double v : l.filters.bias) detail::put_f32(blob, static_cast<float>(v));
  }
  return blob;
}

std::uint64_t net_checksum(const PretrainedNet& net) { return fnv1a64(encode_weight_blob(net)); }

void save_netspec(const PretrainedNet& net, const std::filesystem::path& manifest_path,
                  std::filesystem::path blob_path) {
  net.validate();
  if (blob_path.empty()) {
    blob_path = manifest_path;
    blob_path.replace_extension(".bin");
  }
  const auto blob = encode_weight_blob(net);

  json layers = json::array();
  std::size_t offset = 0;
  for (const auto& l : net.layers) {
    json jl{{"kind", to_string(l.kind)}};
    if (l.is_conv()) {
      const auto& f = l.filters;
      jl["in_channels"] = f.in_channels;
      jl["out_channels"] = f.out_channels;
      jl["kernel_h"] = f.kernel_h;
      jl["kernel_w"] = f.kernel_w;
      jl["stride"] = f.stride;
      jl["padding"] = f.padding;
      jl["weight_offset"] = offset;
      offset += f.weight_count() * sizeof(float);
      jl["bias_offset"] = offset;
      offset += f.out_channels * sizeof(float);
    }
    layers.push_back(std::move(jl));
  }

  // Blob path is recorded relative to the manifest when they share a directory.
  std::filesystem::path recorded = blob_path;
  if (blob_path.parent_path() == manifest_path.parent_path()) recorded = blob_path.filename();

  json manifest{{"format", kManifestFormat},
                {"version", kManifestVersion},
                {"name", net.name},
                {"input", {{"channels", net.input.channels}, {"height", net.input.height}, {"width", net.input.width}}},
                {"blob", recorded.generic_string()},
                {"blob_bytes", blob.size()},
                {"checksum", to_hex(fnv1a64(blob))},
                {"layers", std::move(layers)}};

  detail::write_bytes(blob_path, blob);
  detail::write_text(manifest_path, manifest.dump(2) + "\n");
}

PretrainedNet load_netspec(const std::filesystem::path& manifest_path) {
  if (!std::filesystem::exists(manifest_path)) {
    throw IoError("netspec manifest not found: " + manifest_path.string());
  }
  json manifest;
  try {
    manifest = json::parse(detail::read_text(manifest_path));
  } catch (const json::parse_error& e) {
    throw FormatError("netspec manifest " + manifest_path.string() + ": " + e.what());
  }

  try {
    if (manifest.value("format", std::string{}) != kManifestFormat) {
      throw FormatError("not a netspec manifest (format field missing or wrong)");
    }
    if (manifest.at("version").get<int>() != kManifestVersion) {
      throw FormatError("unsupported netspec version " + manifest.at("version").dump());
    }

    PretrainedNet net;
    net.name = manifest.at("name").get<std::string>();
    const auto& in = manifest.at("input");
    net.input = {in.at("channels").get<std::size_t>(), in.at("height").get<std::size_t>(),
                 in.at("width").get<std::size_t>()};

    std::filesystem::path blob_path = manifest.at("blob").get<std::string>();
    if (blob_path.is_relative()) blob_path = manifest_path.parent_path() / blob_path;
    if (!std::filesystem::exists(blob_path)) throw IoError("weight blob not found: " + blob_path.string());
    const auto blob = detail::read_bytes(blob_path);

    const auto declared_bytes = manifest.at("blob_bytes").get<std::size_t>();
    const auto& jlayers = manifest.at("layers");
    if (!jlayers.is_array()) throw FormatError("'layers' must be an array");

    std::size_t expected_bytes = 0;
    for (std::size_t i = 0; i < jlayers.size(); ++i) {
      const auto& jl = jlayers[i];
      Layer layer;
      layer.kind = parse_layer_kind(jl.at("kind").get<std::string>());
      if (layer.is_conv()) {
        FilterBank& f = layer.filters;
        f.in_channels = field(jl, "in_channels", i);
        f.out_channels = field(jl, "out_channels", i);
        f.kernel_h = field(jl, "kernel_h", i);
        f.kernel_w = field(jl, "kernel_w", i);
        f.stride = field(jl, "stride", i);
        f.padding = field(jl, "padding", i);
        if (f.stride < 1) throw FormatError("layer " + std::to_string(i) + ": stride must be >= 1");
        const std::size_t woff = field(jl, "weight_offset", i);
        const std::size_t boff = field(jl, "bias_offset", i);
        const std::size_t wbytes = f.weight_count() * sizeof(float);
        const std::size_t bbytes = f.out_channels * sizeof(float);
        if (woff + wbytes > blob.size() || boff + bbytes > blob.size()) {
          throw DimensionError("layer " + std::to_string(i) + ": declares " +
                               std::to_string(f.out_channels) + "x" + std::to_string(f.in_channels) +
                               "x" + std::to_string(f.kernel_h) + "x" + std::to_string(f.kernel_w) +
                               " filters but the blob holds only " + std::to_string(blob.size()) +
                               " bytes");
        }
        f.weights.resize(f.weight_count());
        for (std::size_t k = 0; k < f.weights.size(); ++k) {
          f.weights[k] = detail::get_f32(blob, woff + k * sizeof(float));
        }
        f.bias.resize(f.out_channels);
        for (std::size_t k = 0; k < f.bias.size(); ++k) {
          f.bias[k] = detail::get_f32(blob, boff + k * sizeof(float));
        }
        expected_bytes += wbytes + bbytes;
      }
      net.layers.push_back(std::move(layer));
    }

    if (expected_bytes != blob.size() || declared_bytes != blob.size()) {
      throw DimensionError("weight blob is " + std::to_string(blob.size()) + " bytes; layers need " +
                           std::to_string(expected_bytes) + ", manifest declares " +
                           std::to_string(declared_bytes));
    }
    const auto want = parse_hex(manifest.at("checksum").get<std::string>());
    const auto got = fnv1a64(blob);
    if (want != got) {
      throw ChecksumError("weight blob checksum " + to_hex(got) + " does not match manifest " + to_hex(want));
    }
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
      const auto& f = net.layers[i].filters;
      for (double v : f.weights)
        if (!std::isfinite(v)) throw NonFiniteError("layer " + std::to_string(i) + " has a non-finite weight");
      for (double v : f.bias)
        if (!std::isfinite(v)) throw NonFiniteError("layer " + std::to_string(i) + " has a non-finite bias");
    }
    net.validate();
    return net;
  } catch (const json::exception& e) {
    throw FormatError("netspec manifest " + manifest_path.string() + ": " + e.what());
  }
}

}  // namespace fenplan
