#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fenplan/dataset.hpp"
#include "fenplan/netspec.hpp"

namespace fenplan {

// Seeded Gaussian class blobs rendered as C x H x W images: every class has
// a smooth mean image, each sample adds a smooth per-sample field and i.i.d.
// pixel noise, and pixels are clamped to [0, 1].
struct BlobSpec {
  std::size_t channels = 3;
  std::size_t height = 8;
  std::size_t width = 8;
  std::size_t classes = 4;
  std::size_t n_train = 400;
  std::size_t n_test = 200;
  double separation = 0.18;   // amplitude of the class mean pattern
  double field = 0.12;        // amplitude of the per-sample smooth field
  double noise = 0.05;        // i.i.d. pixel noise std
  std::uint64_t seed = 1;
};

LabeledDataset make_blob_dataset(const BlobSpec& spec);

// Two-channel images for the planted-channel experiments. Channel 0 carries a
// class pattern plus sample-specific detail; channel 1 is label-independent
// texture of smaller variance.
struct PlantedSpec {
  std::size_t side = 8;
  std::size_t classes = 4;
  std::size_t n_train = 400;
  std::size_t n_test = 200;
  std::uint64_t seed = 1;
};

LabeledDataset make_planted_dataset(const PlantedSpec& spec);

// One 3x3 conv (pad 1) + relu over planted images with 16 output channels:
//   0..7   read only the label-independent channel (planted noise),
//   8..11  copy the class channel nearly verbatim (informative, high leakage),
//   12..15 blur the class channel (informative, lower leakage).
// Weights are nonnegative so the relu passes everything through.
inline constexpr std::size_t kPlantedChannels = 16;
inline constexpr std::size_t kPlantedNoiseChannels = 8;
PretrainedNet make_planted_net(std::uint64_t seed, std::size_t side = 8);

// Random sequential conv net: 3x3 pad-1 convs with the given widths, each
// followed by relu, and a 2x2 max-pool after the convs listed in pool_after
// (0-based conv ordinals). He-normal weights rounded to float32.
struct ToyNetSpec {
  InputShape input{3, 8, 8};
  std::vector<std::size_t> widths{8, 8, 16, 8};
  std::vector<std::size_t> pool_after{1};
  std::uint64_t seed = 7;
  std::string name = "toy";
};

PretrainedNet make_toy_net(const ToyNetSpec& spec);

}  // namespace fenplan
