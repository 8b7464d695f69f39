#include "fenplan/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "fenplan/error.hpp"
#include "fenplan/rng.hpp"

namespace fenplan {

namespace {

// Sum of a few low-frequency cosines, scaled to unit peak magnitude.
std::vector<double> smooth_field(Rng& rng, std::size_t h, std::size_t w) {
  std::vector<double> f(h * w, 0.0);
  for (int term = 0; term < 4; ++term) {
    const double amp = rng.normal();
    const double fy = static_cast<double>(rng.below(3));
    const double fx = static_cast<double>(rng.below(3));
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const double arg = 2.0 * std::numbers::pi *
                               (fy * static_cast<double>(y) / static_cast<double>(h) +
                                fx * static_cast<double>(x) / static_cast<double>(w)) +
                           phase;
        f[y * w + x] += amp * std::cos(arg);
      }
  }
  double peak = 0.0;
  for (double v : f) peak = std::max(peak, std::abs(v));
  if (peak > 0.0)
    for (double& v : f) v /= peak;
  return f;
}

double to_float32(double v) { return static_cast<double>(static_cast<float>(v)); }

Split render_blobs(const BlobSpec& spec, const std::vector<std::vector<double>>& patterns, std::size_t n,
                   Rng rng) {
  const std::size_t plane = spec.height * spec.width;
  Split s;
  s.images = FeatureTensor(Shape4{n, spec.channels, spec.height, spec.width});
  s.labels.resize(n);
  auto px = s.images.data();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = i % spec.classes;
    s.labels[i] = static_cast<int>(k);
    for (std::size_t c = 0; c < spec.channels; ++c) {
      const auto field = smooth_field(rng, spec.height, spec.width);
      const auto& pattern = patterns[k * spec.channels + c];
      for (std::size_t p = 0; p < plane; ++p) {
        const double v = 0.5 + spec.separation * pattern[p] + spec.field * field[p] + spec.noise * rng.normal();
        px[(i * spec.channels + c) * plane + p] = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return s;
}

Split render_planted(const PlantedSpec& spec, const std::vector<std::vector<double>>& patterns, std::size_t n,
                     Rng rng) {
  const std::size_t plane = spec.side * spec.side;
  Split s;
  s.images = FeatureTensor(Shape4{n, 2, spec.side, spec.side});
  s.labels.resize(n);
  auto px = s.images.data();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = i % spec.classes;
    s.labels[i] = static_cast<int>(k);
    const auto detail = smooth_field(rng, spec.side, spec.side);
    const auto texture = smooth_field(rng, spec.side, spec.side);
    for (std::size_t p = 0; p < plane; ++p) {
      const double signal = 0.5 + 0.25 * patterns[k][p] + 0.12 * detail[p] + 0.06 * rng.normal();
      const double other = 0.5 + 0.06 * texture[p] + 0.03 * rng.normal();
      px[(i * 2 + 0) * plane + p] = std::clamp(signal, 0.0, 1.0);
      px[(i * 2 + 1) * plane + p] = std::clamp(other, 0.0, 1.0);
    }
  }
  return s;
}

}  // namespace

LabeledDataset make_blob_dataset(const BlobSpec& spec) {
  if (spec.classes < 2) throw ConfigError("blob dataset needs at least two classes");
  if (spec.channels == 0 || spec.height == 0 || spec.width == 0) throw DimensionError("blob image has a zero dimension");
  Rng pattern_rng = Rng::stream(spec.seed, "blobs/patterns");
  std::vector<std::vector<double>> patterns;
  for (std::size_t k = 0; k < spec.classes * spec.channels; ++k) {
    patterns.push_back(smooth_field(pattern_rng, spec.height, spec.width));
  }
  LabeledDataset ds;
  ds.id = "synthetic:blobs:c" + std::to_string(spec.channels) + ":" + std::to_string(spec.height) + "x" +
          std::to_string(spec.width) + ":k" + std::to_string(spec.classes) + ":n" + std::to_string(spec.n_train) +
          "/" + std::to_string(spec.n_test) + ":seed" + std::to_string(spec.seed);
  ds.num_classes = spec.classes;
  ds.train = render_blobs(spec, patterns, spec.n_train, Rng::stream(spec.seed, "blobs/train"));
  ds.test = render_blobs(spec, patterns, spec.n_test, Rng::stream(spec.seed, "blobs/test"));
  return ds;
}

LabeledDataset make_planted_dataset(const PlantedSpec& spec) {
  if (spec.classes < 2) throw ConfigError("planted dataset needs at least two classes");
  Rng pattern_rng = Rng::stream(spec.seed, "planted/patterns");
  std::vector<std::vector<double>> patterns;
  for (std::size_t k = 0; k < spec.classes; ++k) patterns.push_back(smooth_field(pattern_rng, spec.side, spec.side));
  LabeledDataset ds;
  ds.id = "synthetic:planted:" + std::to_string(spec.side) + ":k" + std::to_string(spec.classes) + ":n" +
          std::to_string(spec.n_train) + "/" + std::to_string(spec.n_test) + ":seed" + std::to_string(spec.seed);
  ds.num_classes = spec.classes;
  ds.train = render_planted(spec, patterns, spec.n_train, Rng::stream(spec.seed, "planted/train"));
  ds.test = render_planted(spec, patterns, spec.n_test, Rng::stream(spec.seed, "planted/test"));
  return ds;
}

PretrainedNet make_planted_net(std::uint64_t seed, std::size_t side) {
  Rng rng = Rng::stream(seed, "planted/net");
  FilterBank f;
  f.out_channels = kPlantedChannels;
  f.in_channels = 2;
  f.kernel_h = 3;
  f.kernel_w = 3;
  f.padding = 1;
  f.weights.assign(f.weight_count(), 0.0);
  f.bias.assign(f.out_channels, 0.0);
  for (std::size_t o = 0; o < kPlantedChannels; ++o) {
    const double scale = rng.uniform(0.6, 1.4);
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t c = 0; c < 3; ++c) {
        const bool center = r == 1 && c == 1;
        if (o < kPlantedNoiseChannels) {
          f.weight(o, 1, r, c) = to_float32(scale * (center ? 1.0 : 0.1 * rng.uniform()));
        } else if (o < 12) {
          f.weight(o, 0, r, c) = to_float32(scale * (center ? 1.0 : 0.03 * rng.uniform()));
        } else {
          f.weight(o, 0, r, c) = to_float32(scale / 9.0 * (1.0 + 0.05 * rng.uniform()));
        }
      }
  }
  PretrainedNet net;
  net.name = "planted-" + std::to_string(seed);
  net.input = {2, side, side};
  net.layers.push_back(Layer{LayerKind::conv, std::move(f)});
  net.layers.push_back(Layer{LayerKind::relu, {}});
  net.validate();
  return net;
}

PretrainedNet make_toy_net(const ToyNetSpec& spec) {
  Rng rng = Rng::stream(spec.seed, "toy/net");
  PretrainedNet net;
  net.name = spec.name;
  net.input = spec.input;
  std::size_t in = spec.input.channels;
  for (std::size_t l = 0; l < spec.widths.size(); ++l) {
    FilterBank f;
    f.out_channels = spec.widths[l];
    f.in_channels = in;
    f.kernel_h = 3;
    f.kernel_w = 3;
    f.padding = 1;
    const double std_dev = std::sqrt(2.0 / static_cast<double>(in * 9));
    f.weights.resize(f.weight_count());
    for (double& w : f.weights) w = to_float32(std_dev * rng.normal());
    f.bias.resize(f.out_channels);
    for (double& b : f.bias) b = to_float32(0.05 * rng.uniform());
    net.layers.push_back(Layer{LayerKind::conv, std::move(f)});
    net.layers.push_back(Layer{LayerKind::relu, {}});
    if (std::find(spec.pool_after.begin(), spec.pool_after.end(), l) != spec.pool_after.end()) {
      net.layers.push_back(Layer{LayerKind::maxpool, {}});
    }
    in = spec.widths[l];
  }
  net.validate();
  return net;
}

}  // namespace fenplan
