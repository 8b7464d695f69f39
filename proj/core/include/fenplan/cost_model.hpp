#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fenplan/fen.hpp"
#include "fenplan/netspec.hpp"

namespace fenplan {

// Multiply-accumulates of one conv layer on a (channels, h, w) input:
// out_h * out_w * kh * kw * in * out. Zero for pool/relu. Throws
// DimensionError if the input channel count disagrees with the filters.
std::uint64_t conv_macs(const Layer& layer, const InputShape& input);

struct LayerCost {
  std::size_t layer_index = 0;  // position in the FEN's layer list
  LayerKind kind = LayerKind::conv;
  InputShape input;
  InputShape output;
  std::uint64_t macs = 0;
  std::uint64_t params = 0;  // weights + biases

  bool operator==(const LayerCost&) const = default;
};

struct LatencyStats {
  double median_ms = 0.0;  // per image
  double iqr_ms = 0.0;
  std::size_t repetitions = 0;

  bool operator==(const LatencyStats&) const = default;
};

// Per-image compute and weight storage of a FEN. Storage is 4 bytes per
// parameter.
struct CostReport {
  std::vector<LayerCost> layers;
  std::uint64_t total_macs = 0;
  std::uint64_t params = 0;
  std::uint64_t bytes = 0;
  std::uint64_t config_hash = 0;
  std::optional<LatencyStats> latency;                // whole forward pass
  std::vector<std::optional<LatencyStats>> layer_latency;  // empty or one per layer

  bool operator==(const CostReport&) const = default;
};

CostReport fen_cost(const Fen& fen);
// Cost of derive_fen(net, cfg); records cfg.hash().
CostReport fen_cost(const PretrainedNet& net, const FenConfig& cfg);

// Symbols of the supervised-selection overhead estimate.
struct LdaOverheadParams {
  std::uint64_t n_lda = 0;     // samples used for scoring
  std::uint64_t w_prime = 0;   // representation width
  std::uint64_t h_prime = 0;   // representation height
  std::uint64_t w_k = 0;       // kernel width of the cut layer
  std::uint64_t h_k = 0;       // kernel height of the cut layer
  std::uint64_t d_f = 0;       // filter depth of the cut layer
  std::uint64_t d_r = 0;       // channels available at the cut layer
  std::uint64_t d_prime = 0;   // channels released
  std::uint64_t k = 0;         // classes

  // Throws ConfigError unless all are positive and d_prime <= d_r.
  void validate() const;
};

// Operation counts with unit constants; order-of-magnitude estimates only.
struct LdaOverhead {
  std::uint64_t extra_forward = 0;  // N W' H' Wk Hk Df (Dr - D')
  std::uint64_t scatter = 0;        // (K + N) (W' H')^2
  std::uint64_t eigensolve = 0;     // (W' H')^3
  std::uint64_t total = 0;

  bool operator==(const LdaOverhead&) const = default;
};

LdaOverhead lda_overhead(const LdaOverheadParams& p);

// Type-7 quantile of sorted values, p in [0, 1].
double quantile_sorted(std::span<const double> sorted, double p);

struct ProfileOptions {
  std::size_t batch = 1;
  std::size_t repetitions = 5;
  std::uint64_t seed = 0;  // input batch contents
};

// Wall-clock forward time per image, single-threaded: one warm-up round,
// then `repetitions` timed rounds. Fills `latency` and `layer_latency` of
// the returned report. repetitions = 0 skips timing.
CostReport profile_latency(const Fen& fen, const ProfileOptions& opts);

}  // namespace fenplan
