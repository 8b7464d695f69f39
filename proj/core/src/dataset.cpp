#include "fenplan/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fenplan/error.hpp"
#include "file_util.hpp"

namespace fenplan {

namespace {

void check_split(const Split& s, std::size_t k, const char* name) {
  if (s.images.n() != s.labels.size()) {
    throw DimensionError(std::string(name) + " split: " + std::to_string(s.images.n()) + " images, " +
                         std::to_string(s.labels.size()) + " labels");
  }
  for (int y : s.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw ConfigError(std::string(name) + " split: label " + std::to_string(y) + " outside [0, " +
                        std::to_string(k) + ")");
    }
  }
  s.images.require_finite(name);
}

}  // namespace

void LabeledDataset::validate() const {
  if (num_classes < 2) throw ConfigError("dataset '" + id + "' needs at least two classes");
  check_split(train, num_classes, "train");
  check_split(test, num_classes, "test");
  const auto& a = train.images.shape();
  const auto& b = test.images.shape();
  if (a.c != b.c || a.h != b.h || a.w != b.w) throw DimensionError("train and test image shapes differ");
}

Matrix one_hot(std::span<const int> labels, std::size_t num_classes) {
  Matrix m(labels.size(), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      throw ConfigError("label " + std::to_string(labels[i]) + " outside [0, " + std::to_string(num_classes) + ")");
    }
    m(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return m;
}

Split decode_cifar10(std::span<const std::byte> bytes, std::size_t max_records) {
  if (bytes.size() % kCifarRecordBytes != 0) {
    throw FormatError("CIFAR-10 file is " + std::to_string(bytes.size()) + " bytes, not a multiple of " +
                      std::to_string(kCifarRecordBytes));
  }
  const std::size_t n = std::min(bytes.size() / kCifarRecordBytes, max_records);
  Split s;
  s.images = FeatureTensor(Shape4{n, 3, kCifarSide, kCifarSide});
  s.labels.resize(n);
  auto px = s.images.data();
  constexpr std::size_t kPixels = kCifarRecordBytes - 1;
  for (std::size_t i = 0; i < n; ++i) {
    const auto* rec = bytes.data() + i * kCifarRecordBytes;
    const auto label = std::to_integer<int>(rec[0]);
    if (label >= static_cast<int>(kCifarClasses)) {
      throw FormatError("CIFAR-10 record " + std::to_string(i) + " has label " + std::to_string(label));
    }
    s.labels[i] = label;
    for (std::size_t p = 0; p < kPixels; ++p) {
      px[i * kPixels + p] = static_cast<double>(std::to_integer<unsigned>(rec[1 + p])) / 255.0;
    }
  }
  return s;
}

Split read_cifar10_bin(const std::filesystem::path& path, std::size_t max_records) {
  return decode_cifar10(detail::read_bytes(path), max_records);
}

std::vector<std::byte> encode_cifar10(const Split& split) {
  const auto& s = split.images.shape();
  if (s.c != 3 || s.h != kCifarSide || s.w != kCifarSide) {
    throw DimensionError("CIFAR-10 records hold 3x32x32 images");
  }
  if (split.labels.size() != s.n) throw DimensionError("label count differs from image count");
  std::vector<std::byte> out;
  out.reserve(s.n * kCifarRecordBytes);
  for (std::size_t i = 0; i < s.n; ++i) {
    const int y = split.labels[i];
    if (y < 0 || y >= static_cast<int>(kCifarClasses)) throw ConfigError("CIFAR-10 label out of range");
    out.push_back(static_cast<std::byte>(y));
    for (double v : split.images.sample(i)) {
      const double q = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
      out.push_back(static_cast<std::byte>(static_cast<unsigned>(q)));
    }
  }
  return out;
}

LabeledDataset load_cifar10_dir(const std::filesystem::path& dir, std::size_t train_limit, std::size_t test_limit) {
  LabeledDataset ds;
  ds.id = "cifar10:" + dir.filename().string();
  ds.num_classes = kCifarClasses;

  std::vector<double> pixels;
  std::vector<int> labels;
  for (int b = 1; b <= 5 && labels.size() < train_limit; ++b) {
    const auto path = dir / ("data_batch_" + std::to_string(b) + ".bin");
    if (!std::filesystem::exists(path)) {
      if (b == 1) throw IoError("missing " + path.string());
      break;
    }
    Split part = read_cifar10_bin(path, train_limit - labels.size());
    pixels.insert(pixels.end(), part.images.data().begin(), part.images.data().end());
    labels.insert(labels.end(), part.labels.begin(), part.labels.end());
  }
  ds.train.images = FeatureTensor(Shape4{labels.size(), 3, kCifarSide, kCifarSide}, std::move(pixels));
  ds.train.labels = std::move(labels);
  ds.test = read_cifar10_bin(dir / "test_batch.bin", test_limit);
  ds.validate();
  return ds;
}

}  // namespace fenplan
