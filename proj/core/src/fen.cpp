#include "fenplan/fen.hpp"

#include <algorithm>
#include <string>

#include "fenplan/checksum.hpp"
#include "fenplan/error.hpp"

namespace fenplan {

namespace {

void check_subset(const std::vector<std::size_t>& subset, std::size_t limit, const std::string& what) {
  if (subset.empty()) throw ConfigError(what + " is empty");
  for (std::size_t i = 0; i < subset.size(); ++i) {
    if (subset[i] >= limit) {
      throw ConfigError(what + " contains index " + std::to_string(subset[i]) + " >= " + std::to_string(limit));
    }
    if (i > 0 && subset[i] <= subset[i - 1]) throw ConfigError(what + " is not strictly increasing");
  }
}

std::vector<std::size_t> iota_vec(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace

FenConfig FenConfig::full(const PretrainedNet& net, std::size_t m) {
  const auto widths = net.conv_widths();
  if (m < 1 || m > widths.size()) {
    throw ConfigError("m=" + std::to_string(m) + " outside [1, " + std::to_string(widths.size()) + "]");
  }
  FenConfig cfg;
  cfg.m = m;
  for (std::size_t l = 0; l < m; ++l) cfg.kept_channels.push_back(iota_vec(widths[l]));
  cfg.output_channels = cfg.kept_channels.back();
  return cfg;
}

void FenConfig::normalize() {
  auto tidy = [](std::vector<std::size_t>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  for (auto& k : kept_channels) tidy(k);
  tidy(output_channels);
}

void FenConfig::validate(const PretrainedNet& net) const {
  const auto widths = net.conv_widths();
  if (m < 1 || m > widths.size()) {
    throw ConfigError("m=" + std::to_string(m) + " outside [1, " + std::to_string(widths.size()) + "]");
  }
  if (kept_channels.size() != m) {
    throw ConfigError("kept_channels has " + std::to_string(kept_channels.size()) + " subsets, expected m=" +
                      std::to_string(m));
  }
  for (std::size_t l = 0; l < m; ++l) {
    check_subset(kept_channels[l], widths[l], "kept_channels[" + std::to_string(l) + "]");
  }
  check_subset(output_channels, widths[m - 1], "output_channels");
  const auto& last = kept_channels.back();
  for (std::size_t ch : output_channels) {
    if (!std::binary_search(last.begin(), last.end(), ch)) {
      throw ConfigError("output channel " + std::to_string(ch) + " is not kept at the last conv layer");
    }
  }
}

std::uint64_t FenConfig::hash() const {
  Fnv1a64 h;
  h.update("fenconfig/v1;m=" + std::to_string(m));
  for (const auto& k : kept_channels) {
    h.update(";k=");
    for (std::size_t ch : k) h.update(std::to_string(ch) + ",");
  }
  h.update(";o=");
  for (std::size_t ch : output_channels) h.update(std::to_string(ch) + ",");
  return h.digest();
}

Fen::Fen(InputShape input, std::vector<Layer> layers, std::vector<std::vector<std::size_t>> kept)
    : input_(input), layers_(std::move(layers)), kept_(std::move(kept)) {
  if (kept_.empty()) throw ConfigError("a FEN needs at least one conv layer");
}

Shape4 Fen::output_shape(std::size_t n) const {
  Shape4 s{n, input_.channels, input_.height, input_.width};
  for (const auto& l : layers_) {
    switch (l.kind) {
      case LayerKind::conv:
        s = Shape4{n, l.filters.out_channels, l.filters.out_h(s.h), l.filters.out_w(s.w)};
        break;
      case LayerKind::maxpool:
        if (s.h % 2 != 0 || s.w % 2 != 0) throw DimensionError("maxpool on odd spatial dims");
        s.h /= 2;
        s.w /= 2;
        break;
      case LayerKind::relu:
        break;
    }
  }
  return s;
}

FeatureTensor Fen::forward(const FeatureTensor& batch) const {
  if (batch.c() != input_.channels) {
    throw DimensionError("forward: batch has " + std::to_string(batch.c()) + " channels, FEN expects " +
                         std::to_string(input_.channels));
  }
  FeatureTensor x = batch;
  for (const auto& l : layers_) {
    switch (l.kind) {
      case LayerKind::conv: x = conv2d(x, l.filters); break;
      case LayerKind::maxpool: x = maxpool2x2(x); break;
      case LayerKind::relu: x = relu(x); break;
    }
  }
  return x;
}

Fen truncate(const PretrainedNet& net, std::size_t m) {
  const std::size_t total = net.conv_count();
  if (m < 1 || m > total) {
    throw ConfigError("m=" + std::to_string(m) + " outside [1, " + std::to_string(total) + "]");
  }
  std::vector<Layer> layers;
  std::vector<std::vector<std::size_t>> kept;
  for (const auto& l : net.layers) {
    if (l.is_conv()) {
      if (kept.size() == m) break;
      kept.push_back(iota_vec(l.filters.out_channels));
    }
    layers.push_back(l);
  }
  return Fen(net.input, std::move(layers), std::move(kept));
}

Fen slice_conv(const Fen& fen, std::size_t conv_ordinal, std::span<const std::size_t> positions) {
  if (conv_ordinal >= fen.conv_count()) {
    throw ConfigError("conv layer " + std::to_string(conv_ordinal) + " is outside the FEN (" +
                      std::to_string(fen.conv_count()) + " conv layers)");
  }
  const std::vector<std::size_t> pos(positions.begin(), positions.end());
  check_subset(pos, fen.kept_channels()[conv_ordinal].size(),
               "channel subset for conv layer " + std::to_string(conv_ordinal));

  std::vector<Layer> layers = fen.layers();
  std::size_t ordinal = 0;
  for (auto& l : layers) {
    if (!l.is_conv()) continue;
    FilterBank& f = l.filters;
    if (ordinal == conv_ordinal) {
      FilterBank out = f;
      out.out_channels = pos.size();
      out.weights.clear();
      out.bias.clear();
      for (std::size_t p : pos) {
        auto src = f.filter(p);
        out.weights.insert(out.weights.end(), src.begin(), src.end());
        out.bias.push_back(f.bias[p]);
      }
      f = std::move(out);
    } else if (ordinal == conv_ordinal + 1) {
      FilterBank out = f;
      out.in_channels = pos.size();
      out.weights.clear();
      const std::size_t plane = f.kernel_h * f.kernel_w;
      for (std::size_t o = 0; o < f.out_channels; ++o) {
        for (std::size_t p : pos) {
          const auto begin = f.weights.begin() + static_cast<std::ptrdiff_t>((o * f.in_channels + p) * plane);
          out.weights.insert(out.weights.end(), begin, begin + static_cast<std::ptrdiff_t>(plane));
        }
      }
      f = std::move(out);
    }
    ++ordinal;
  }

  auto kept = fen.kept_channels();
  std::vector<std::size_t> mapped;
  for (std::size_t p : pos) mapped.push_back(kept[conv_ordinal][p]);
  kept[conv_ordinal] = std::move(mapped);
  return Fen(fen.input(), std::move(layers), std::move(kept));
}

Fen derive_fen(const PretrainedNet& net, const FenConfig& cfg) {
  cfg.validate(net);
  Fen fen = truncate(net, cfg.m);
  // Unsliced layers number channels by their original index, so the config's
  // subsets double as positions.
  for (std::size_t l = 0; l + 1 < cfg.m; ++l) fen = slice_conv(fen, l, cfg.kept_channels[l]);
  return slice_conv(fen, cfg.m - 1, cfg.output_channels);
}

Matrix flatten_channel(const FeatureTensor& reps, std::size_t j) {
  if (j >= reps.c()) {
    throw ConfigError("channel " + std::to_string(j) + " out of range for c=" + std::to_string(reps.c()));
  }
  Matrix out(reps.n(), reps.h() * reps.w());
  for (std::size_t i = 0; i < reps.n(); ++i) {
    auto src = reps.plane(i, j);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

Matrix flatten_samples(const FeatureTensor& reps) {
  return Matrix(reps.n(), reps.shape().sample_size(),
                std::vector<double>(reps.data().begin(), reps.data().end()));
}

}  // namespace fenplan
