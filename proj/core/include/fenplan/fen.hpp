#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fenplan/netspec.hpp"
#include "fenplan/tensor.hpp"

namespace fenplan {

// The transformation released by a client: the first `m` conv layers of a
// net (each with the relu/pool layers that follow it up to the next conv),
// keeping only some channels at each conv layer.
//
// Channel indices refer to the original net's numbering.
struct FenConfig {
  std::size_t m = 1;
  // One sorted subset per conv layer in the prefix.
  std::vector<std::vector<std::size_t>> kept_channels;
  // Subset of kept_channels.back(); its size is the released depth D'.
  std::vector<std::size_t> output_channels;
  std::uint64_t seed = 0;

  // Every channel kept at every layer of the m-prefix.
  static FenConfig full(const PretrainedNet& net, std::size_t m);

  std::size_t depth() const noexcept { return output_channels.size(); }
  // Sorts and deduplicates every subset in place.
  void normalize();
  // Throws ConfigError describing the first violated invariant.
  void validate(const PretrainedNet& net) const;
  // Stable hash of the (normalized) configuration.
  std::uint64_t hash() const;

  bool operator==(const FenConfig&) const = default;
};

// Frozen, sliced network ready for forward passes.
class Fen {
 public:
  Fen(InputShape input, std::vector<Layer> layers, std::vector<std::vector<std::size_t>> kept);

  const InputShape& input() const noexcept { return input_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  // Original channel indices kept at each conv layer, after all slicing.
  const std::vector<std::vector<std::size_t>>& kept_channels() const noexcept { return kept_; }
  std::size_t conv_count() const noexcept { return kept_.size(); }
  std::size_t output_channels() const noexcept { return kept_.back().size(); }

  // Shape after every layer for a batch of n inputs.
  Shape4 output_shape(std::size_t n = 1) const;

  FeatureTensor forward(const FeatureTensor& batch) const;

 private:
  InputShape input_;
  std::vector<Layer> layers_;
  std::vector<std::vector<std::size_t>> kept_;
};

// The first m conv layers of `net` with nothing sliced.
Fen truncate(const PretrainedNet& net, std::size_t m);

// Keeps only `positions` (indices into the current channel list) of conv
// layer `conv_ordinal`; the next conv layer loses the matching input slices.
Fen slice_conv(const Fen& fen, std::size_t conv_ordinal, std::span<const std::size_t> positions);

// Truncates at cfg.m, applies intermediate subsets, then the output subset.
Fen derive_fen(const PretrainedNet& net, const FenConfig& cfg);

// N x (h*w) matrix: row i is channel j of sample i, flattened row-major.
Matrix flatten_channel(const FeatureTensor& reps, std::size_t j);
// N x (c*h*w) matrix: row i is sample i flattened.
Matrix flatten_samples(const FeatureTensor& reps);

}  // namespace fenplan
