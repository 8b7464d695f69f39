#include "fenplan/cost_model.hpp"

#include <algorithm>
#include <chrono>
#include <string>

#include "fenplan/error.hpp"
#include "fenplan/rng.hpp"

namespace fenplan {

namespace {

InputShape layer_output(const Layer& layer, const InputShape& in) {
  switch (layer.kind) {
    case LayerKind::conv:
      return {layer.filters.out_channels, layer.filters.out_h(in.height), layer.filters.out_w(in.width)};
    case LayerKind::maxpool:
      if (in.height % 2 != 0 || in.width % 2 != 0) throw DimensionError("maxpool on odd spatial dims");
      return {in.channels, in.height / 2, in.width / 2};
    case LayerKind::relu:
      break;
  }
  return in;
}

FeatureTensor apply_layer(const Layer& layer, const FeatureTensor& x) {
  switch (layer.kind) {
    case LayerKind::conv: return conv2d(x, layer.filters);
    case LayerKind::maxpool: return maxpool2x2(x);
    case LayerKind::relu: break;
  }
  return relu(x);
}

LatencyStats summarize(std::vector<double> per_image_ms) {
  std::sort(per_image_ms.begin(), per_image_ms.end());
  LatencyStats s;
  s.repetitions = per_image_ms.size();
  s.median_ms = quantile_sorted(per_image_ms, 0.5);
  s.iqr_ms = quantile_sorted(per_image_ms, 0.75) - quantile_sorted(per_image_ms, 0.25);
  return s;
}

}  // namespace

std::uint64_t conv_macs(const Layer& layer, const InputShape& input) {
  if (!layer.is_conv()) return 0;
  const FilterBank& f = layer.filters;
  if (input.channels != f.in_channels) {
    throw DimensionError("conv expects " + std::to_string(f.in_channels) + " input channels, got " +
                         std::to_string(input.channels));
  }
  return static_cast<std::uint64_t>(f.out_h(input.height)) * f.out_w(input.width) * f.kernel_h * f.kernel_w *
         f.in_channels * f.out_channels;
}

CostReport fen_cost(const Fen& fen) {
  CostReport r;
  InputShape shape = fen.input();
  for (std::size_t i = 0; i < fen.layers().size(); ++i) {
    const Layer& l = fen.layers()[i];
    LayerCost c;
    c.layer_index = i;
    c.kind = l.kind;
    c.input = shape;
    c.output = layer_output(l, shape);
    c.macs = conv_macs(l, shape);
    c.params = l.is_conv() ? l.filters.parameter_count() : 0;
    r.total_macs += c.macs;
    r.params += c.params;
    shape = c.output;
    r.layers.push_back(c);
  }
  r.bytes = r.params * 4;
  return r;
}

CostReport fen_cost(const PretrainedNet& net, const FenConfig& cfg) {
  CostReport r = fen_cost(derive_fen(net, cfg));
  r.config_hash = cfg.hash();
  return r;
}

void LdaOverheadParams::validate() const {
  if (n_lda == 0 || w_prime == 0 || h_prime == 0 || w_k == 0 || h_k == 0 || d_f == 0 || d_r == 0 ||
      d_prime == 0 || k == 0) {
    throw ConfigError("overhead parameters must all be positive");
  }
  if (d_prime > d_r) throw ConfigError("D' exceeds the available channel count");
}

LdaOverhead lda_overhead(const LdaOverheadParams& p) {
  p.validate();
  const std::uint64_t area = p.w_prime * p.h_prime;
  LdaOverhead o;
  o.extra_forward = p.n_lda * area * p.w_k * p.h_k * p.d_f * (p.d_r - p.d_prime);
  o.scatter = (p.k + p.n_lda) * area * area;
  o.eigensolve = area * area * area;
  o.total = o.extra_forward + o.scatter + o.eigensolve;
  return o;
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw ConfigError("quantile of an empty sample");
  const double h = static_cast<double>(sorted.size() - 1) * std::clamp(p, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(h);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

CostReport profile_latency(const Fen& fen, const ProfileOptions& opts) {
  CostReport report = fen_cost(fen);
  if (opts.repetitions == 0) return report;
  if (opts.batch == 0) throw ConfigError("profile batch must be positive");

  const InputShape& in = fen.input();
  FeatureTensor batch(Shape4{opts.batch, in.channels, in.height, in.width});
  Rng rng = Rng::stream(opts.seed, "profile/input");
  for (double& v : batch.data()) v = rng.uniform();

  using clock = std::chrono::steady_clock;
  const std::size_t n_layers = fen.layers().size();
  std::vector<std::vector<double>> layer_ms(n_layers);
  std::vector<double> total_ms;
  const double scale = 1.0 / static_cast<double>(opts.batch);
  for (std::size_t rep = 0; rep <= opts.repetitions; ++rep) {
    FeatureTensor x = batch;
    double sum = 0.0;
    std::vector<double> round(n_layers);
    for (std::size_t i = 0; i < n_layers; ++i) {
      const auto t0 = clock::now();
      x = apply_layer(fen.layers()[i], x);
      const auto t1 = clock::now();
      round[i] = std::chrono::duration<double, std::milli>(t1 - t0).count() * scale;
      sum += round[i];
    }
    if (rep == 0) continue;  // warm-up
    for (std::size_t i = 0; i < n_layers; ++i) layer_ms[i].push_back(round[i]);
    total_ms.push_back(sum);
  }
  report.latency = summarize(total_ms);
  for (auto& v : layer_ms) report.layer_latency.push_back(summarize(std::move(v)));
  return report;
}

}  // namespace fenplan
