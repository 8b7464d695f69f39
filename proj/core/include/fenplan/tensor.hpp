#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fenplan {

struct Shape4 {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t size() const noexcept { return n * c * h * w; }
  std::size_t sample_size() const noexcept { return c * h * w; }
  std::size_t plane_size() const noexcept { return h * w; }
  bool operator==(const Shape4&) const = default;
};

// Dense N x C x H x W array, row-major. Holds both images and intermediate
// representations.
class FeatureTensor {
 public:
  FeatureTensor() = default;
  explicit FeatureTensor(Shape4 shape, double fill = 0.0);
  // Throws DimensionError if data.size() != shape.size().
  FeatureTensor(Shape4 shape, std::vector<double> data);

  const Shape4& shape() const noexcept { return shape_; }
  std::size_t n() const noexcept { return shape_.n; }
  std::size_t c() const noexcept { return shape_.c; }
  std::size_t h() const noexcept { return shape_.h; }
  std::size_t w() const noexcept { return shape_.w; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  double& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) noexcept {
    return data_[((n * shape_.c + c) * shape_.h + y) * shape_.w + x];
  }
  double at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return data_[((n * shape_.c + c) * shape_.h + y) * shape_.w + x];
  }

  std::span<const double> sample(std::size_t i) const noexcept {
    return std::span(data_).subspan(i * shape_.sample_size(), shape_.sample_size());
  }
  std::span<const double> plane(std::size_t i, std::size_t ch) const noexcept {
    return std::span(data_).subspan((i * shape_.c + ch) * shape_.plane_size(), shape_.plane_size());
  }

  bool all_finite() const noexcept;
  // Throws NonFiniteError naming `what` if any entry is NaN or infinite.
  void require_finite(const char* what) const;

  // Samples [first, first + count) as a new tensor.
  FeatureTensor slice_batch(std::size_t first, std::size_t count) const;
  // Channels at the given positions, in the given order.
  FeatureTensor select_channels(std::span<const std::size_t> channels) const;

  bool operator==(const FeatureTensor&) const = default;

 private:
  Shape4 shape_;
  std::vector<double> data_;
};

// Row-major dense matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  // Throws DimensionError if data.size() != rows * cols.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const noexcept {
    return std::span(data_).subspan(r * cols_, cols_);
  }
  std::span<double> row(std::size_t r) noexcept { return std::span(data_).subspan(r * cols_, cols_); }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  Matrix transposed() const;
  double trace() const;
  double frobenius_norm() const;
  bool all_finite() const noexcept;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
// a^T * b without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

// Convolution filters ordered [out][in][kernel_row][kernel_col], one bias per
// output channel, symmetric zero padding.
struct FilterBank {
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  std::size_t filter_size() const noexcept { return in_channels * kernel_h * kernel_w; }
  std::size_t weight_count() const noexcept { return out_channels * filter_size(); }
  std::size_t parameter_count() const noexcept { return weight_count() + out_channels; }

  double weight(std::size_t o, std::size_t i, std::size_t r, std::size_t c) const noexcept {
    return weights[((o * in_channels + i) * kernel_h + r) * kernel_w + c];
  }
  double& weight(std::size_t o, std::size_t i, std::size_t r, std::size_t c) noexcept {
    return weights[((o * in_channels + i) * kernel_h + r) * kernel_w + c];
  }
  std::span<const double> filter(std::size_t o) const noexcept {
    return std::span(weights).subspan(o * filter_size(), filter_size());
  }

  // Output spatial size for an input of h x w. Throws DimensionError when the
  // padded input is smaller than the kernel.
  std::size_t out_h(std::size_t h) const;
  std::size_t out_w(std::size_t w) const;

  // Checks stride, array sizes and finiteness.
  void validate() const;

  bool operator==(const FilterBank&) const = default;
};

FeatureTensor conv2d(const FeatureTensor& input, const FilterBank& filters);
// Requires even h and w.
FeatureTensor maxpool2x2(const FeatureTensor& input);
FeatureTensor relu(const FeatureTensor& input);

}  // namespace fenplan
