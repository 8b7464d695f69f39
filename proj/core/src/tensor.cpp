#include "fenplan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fenplan/error.hpp"

namespace fenplan {

namespace {

std::string shape_str(const Shape4& s) {
  return std::to_string(s.n) + "x" + std::to_string(s.c) + "x" + std::to_string(s.h) + "x" +
         std::to_string(s.w);
}

bool finite_range(std::span<const double> values) noexcept {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

FeatureTensor::FeatureTensor(Shape4 shape, double fill) : shape_(shape), data_(shape.size(), fill) {}

FeatureTensor::FeatureTensor(Shape4 shape, std::vector<double> data)
    : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.size()) {
    throw DimensionError("tensor " + shape_str(shape_) + " needs " + std::to_string(shape_.size()) +
                         " values, got " + std::to_string(data_.size()));
  }
}

bool FeatureTensor::all_finite() const noexcept { return finite_range(data_); }

void FeatureTensor::require_finite(const char* what) const {
  if (!all_finite()) throw NonFiniteError(std::string(what) + " contains NaN or Inf");
}

FeatureTensor FeatureTensor::slice_batch(std::size_t first, std::size_t count) const {
  if (first + count > shape_.n) {
    throw DimensionError("batch slice [" + std::to_string(first) + ", " +
                         std::to_string(first + count) + ") exceeds n=" + std::to_string(shape_.n));
  }
  Shape4 s = shape_;
  s.n = count;
  const auto stride = shape_.sample_size();
  std::vector<double> out(data_.begin() + static_cast<std::ptrdiff_t>(first * stride),
                          data_.begin() + static_cast<std::ptrdiff_t>((first + count) * stride));
  return FeatureTensor(s, std::move(out));
}

FeatureTensor FeatureTensor::select_channels(std::span<const std::size_t> channels) const {
  for (std::size_t ch : channels) {
    if (ch >= shape_.c) {
      throw ConfigError("channel " + std::to_string(ch) + " out of range for c=" +
                        std::to_string(shape_.c));
    }
  }
  Shape4 s = shape_;
  s.c = channels.size();
  FeatureTensor out(s);
  auto dst = out.data_.begin();
  for (std::size_t i = 0; i < shape_.n; ++i) {
    for (std::size_t ch : channels) {
      auto src = this->plane(i, ch);
      dst = std::copy(src.begin(), src.end(), dst);
    }
  }
  return out;
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError("matrix " + std::to_string(rows) + "x" + std::to_string(cols) +
                         " needs " + std::to_string(rows * cols) + " values, got " +
                         std::to_string(data_.size()));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

double Matrix::trace() const {
  double t = 0.0;
  for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
  return t;
}

double Matrix::frobenius_norm() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return std::sqrt(s);
}

bool Matrix::all_finite() const noexcept { return finite_range(data_); }

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto src = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += aik * src[j];
    }
  }
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("matmul_tn: row counts differ (" + std::to_string(a.rows()) + " vs " +
                         std::to_string(b.rows()) + ")");
  }
  Matrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto arow = a.row(k);
    auto brow = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      auto dst = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += aki * brow[j];
    }
  }
  return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("matrix subtract: shape mismatch");
  Matrix out = a;
  auto d = out.data();
  auto s = b.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] -= s[i];
  return out;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("matrix add: shape mismatch");
  Matrix out = a;
  auto d = out.data();
  auto s = b.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
  return out;
}

Matrix operator*(double s, const Matrix& a) {
  Matrix out = a;
  for (double& v : out.data()) v *= s;
  return out;
}

std::size_t FilterBank::out_h(std::size_t h) const {
  const std::size_t padded = h + 2 * padding;
  if (padded < kernel_h) {
    throw DimensionError("padded height " + std::to_string(padded) + " < kernel height " +
                         std::to_string(kernel_h));
  }
  return (padded - kernel_h) / stride + 1;
}

std::size_t FilterBank::out_w(std::size_t w) const {
  const std::size_t padded = w + 2 * padding;
  if (padded < kernel_w) {
    throw DimensionError("padded width " + std::to_string(padded) + " < kernel width " +
                         std::to_string(kernel_w));
  }
  return (padded - kernel_w) / stride + 1;
}

void FilterBank::validate() const {
  if (stride < 1) throw ConfigError("filter bank stride must be >= 1");
  if (out_channels == 0 || in_channels == 0 || kernel_h == 0 || kernel_w == 0) {
    throw DimensionError("filter bank has a zero dimension");
  }
  if (weights.size() != weight_count()) {
    throw DimensionError("filter bank expects " + std::to_string(weight_count()) +
                         " weights, has " + std::to_string(weights.size()));
  }
  if (bias.size() != out_channels) {
    throw DimensionError("filter bank expects " + std::to_string(out_channels) +
                         " biases, has " + std::to_string(bias.size()));
  }
  if (!finite_range(weights) || !finite_range(bias)) {
    throw NonFiniteError("filter bank contains NaN or Inf");
  }
}

FeatureTensor conv2d(const FeatureTensor& input, const FilterBank& filters) {
  filters.validate();
  if (input.c() != filters.in_channels) {
    throw DimensionError("conv2d: input has " + std::to_string(input.c()) +
                         " channels, filters expect " + std::to_string(filters.in_channels));
  }
  input.require_finite("conv2d input");

  const std::size_t oh = filters.out_h(input.h());
  const std::size_t ow = filters.out_w(input.w());
  FeatureTensor out(Shape4{input.n(), filters.out_channels, oh, ow});

  const auto H = static_cast<std::ptrdiff_t>(input.h());
  const auto W = static_cast<std::ptrdiff_t>(input.w());
  const auto pad = static_cast<std::ptrdiff_t>(filters.padding);
  const auto stride = static_cast<std::ptrdiff_t>(filters.stride);

  for (std::size_t n = 0; n < input.n(); ++n) {
    for (std::size_t o = 0; o < filters.out_channels; ++o) {
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          double acc = filters.bias[o];
          const std::ptrdiff_t y0 = static_cast<std::ptrdiff_t>(oy) * stride - pad;
          const std::ptrdiff_t x0 = static_cast<std::ptrdiff_t>(ox) * stride - pad;
          for (std::size_t i = 0; i < filters.in_channels; ++i) {
            for (std::size_t r = 0; r < filters.kernel_h; ++r) {
              const std::ptrdiff_t y = y0 + static_cast<std::ptrdiff_t>(r);
              if (y < 0 || y >= H) continue;
              for (std::size_t c = 0; c < filters.kernel_w; ++c) {
                const std::ptrdiff_t x = x0 + static_cast<std::ptrdiff_t>(c);
                if (x < 0 || x >= W) continue;
                acc += filters.weight(o, i, r, c) *
                       input.at(n, i, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
              }
            }
          }
          out.at(n, o, oy, ox) = acc;
        }
      }
    }
  }
  return out;
}

FeatureTensor maxpool2x2(const FeatureTensor& input) {
  if (input.h() % 2 != 0 || input.w() % 2 != 0) {
    throw DimensionError("maxpool2x2 needs even spatial dims, got " + std::to_string(input.h()) +
                         "x" + std::to_string(input.w()));
  }
  FeatureTensor out(Shape4{input.n(), input.c(), input.h() / 2, input.w() / 2});
  for (std::size_t n = 0; n < input.n(); ++n)
    for (std::size_t c = 0; c < input.c(); ++c)
      for (std::size_t y = 0; y < out.h(); ++y)
        for (std::size_t x = 0; x < out.w(); ++x) {
          out.at(n, c, y, x) = std::max({input.at(n, c, 2 * y, 2 * x), input.at(n, c, 2 * y, 2 * x + 1),
                                         input.at(n, c, 2 * y + 1, 2 * x),
                                         input.at(n, c, 2 * y + 1, 2 * x + 1)});
        }
  return out;
}

FeatureTensor relu(const FeatureTensor& input) {
  FeatureTensor out = input;
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

}  // namespace fenplan
