#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fenplan/tensor.hpp"

namespace fenplan {

// Images (pixels in [0, 1]) with one class index per image.
struct Split {
  FeatureTensor images;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
};

struct LabeledDataset {
  std::string id;
  std::size_t num_classes = 0;
  Split train;
  Split test;

  // Throws on label/image count mismatch, labels outside [0, num_classes),
  // differing image shapes between splits, or non-finite pixels.
  void validate() const;
};

// N x K indicator matrix with exactly one 1 per row.
Matrix one_hot(std::span<const int> labels, std::size_t num_classes);

// CIFAR-10 binary records: 1 label byte, then 3 x 1024 bytes (R, G, B
// planes, row-major 32 x 32). Pixels are mapped to [0, 1] by /255.
inline constexpr std::size_t kCifarSide = 32;
inline constexpr std::size_t kCifarRecordBytes = 1 + 3 * kCifarSide * kCifarSide;
inline constexpr std::size_t kCifarClasses = 10;

// Throws FormatError if the byte count is not a whole number of records or a
// label exceeds 9.
Split decode_cifar10(std::span<const std::byte> bytes,
                     std::size_t max_records = std::numeric_limits<std::size_t>::max());
Split read_cifar10_bin(const std::filesystem::path& path,
                       std::size_t max_records = std::numeric_limits<std::size_t>::max());
// Inverse of decode_cifar10 for 3 x 32 x 32 splits; pixels are rounded to
// the nearest 1/255 step.
std::vector<std::byte> encode_cifar10(const Split& split);

// data_batch_1..5.bin for training (in order, up to train_limit records) and
// test_batch.bin for testing.
LabeledDataset load_cifar10_dir(const std::filesystem::path& dir,
                                std::size_t train_limit = std::numeric_limits<std::size_t>::max(),
                                std::size_t test_limit = std::numeric_limits<std::size_t>::max());

}  // namespace fenplan
