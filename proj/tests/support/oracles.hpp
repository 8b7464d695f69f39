#pragma once

// Reference implementations the library is checked against. Written
// independently of core/src: plain loop nests and Eigen dense solvers.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "fenplan/netspec.hpp"
#include "fenplan/planner.hpp"
#include "fenplan/tensor.hpp"

namespace oracle {

// Uniform doubles from a std::mt19937_64; independent of fenplan::Rng.
class Draw {
 public:
  explicit Draw(std::uint64_t seed) : e_(seed) {}
  double uniform(double lo = 0.0, double hi = 1.0) {
    return lo + (hi - lo) * static_cast<double>(e_() >> 11) * 0x1.0p-53;
  }
  double normal() {
    const double u1 = std::max(uniform(), 1e-300);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(e_() % n); }

 private:
  std::mt19937_64 e_;
};

inline fenplan::FeatureTensor random_tensor(Draw& d, fenplan::Shape4 s, double lo = -1.0, double hi = 1.0) {
  fenplan::FeatureTensor t(s);
  for (double& v : t.data()) v = d.uniform(lo, hi);
  return t;
}

inline fenplan::FilterBank random_filters(Draw& d, std::size_t out, std::size_t in, std::size_t kh, std::size_t kw,
                                          std::size_t stride, std::size_t pad, bool with_bias = true) {
  fenplan::FilterBank f;
  f.out_channels = out;
  f.in_channels = in;
  f.kernel_h = kh;
  f.kernel_w = kw;
  f.stride = stride;
  f.padding = pad;
  f.weights.resize(out * in * kh * kw);
  for (double& w : f.weights) w = d.uniform(-1.0, 1.0);
  f.bias.assign(out, 0.0);
  if (with_bias)
    for (double& b : f.bias) b = d.uniform(-0.5, 0.5);
  return f;
}

// Six nested loops over (n, o, y, x) and the (i, r, c) window, reading zero
// outside the input.
inline std::vector<double> conv_loop_nest(const fenplan::FeatureTensor& in, const fenplan::FilterBank& f,
                                          std::size_t& oh, std::size_t& ow) {
  const long H = static_cast<long>(in.h()), W = static_cast<long>(in.w());
  const long P = static_cast<long>(f.padding), S = static_cast<long>(f.stride);
  const long KH = static_cast<long>(f.kernel_h), KW = static_cast<long>(f.kernel_w);
  oh = static_cast<std::size_t>((H + 2 * P - KH) / S + 1);
  ow = static_cast<std::size_t>((W + 2 * P - KW) / S + 1);
  std::vector<double> out(in.n() * f.out_channels * oh * ow, 0.0);
  for (std::size_t n = 0; n < in.n(); ++n)
    for (std::size_t o = 0; o < f.out_channels; ++o)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
          double acc = f.bias[o];
          for (std::size_t i = 0; i < f.in_channels; ++i)
            for (long r = 0; r < KH; ++r)
              for (long c = 0; c < KW; ++c) {
                const long iy = static_cast<long>(y) * S - P + r;
                const long ix = static_cast<long>(x) * S - P + c;
                if (iy < 0 || ix < 0 || iy >= H || ix >= W) continue;
                acc += in.at(n, i, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) *
                       f.weight(o, i, static_cast<std::size_t>(r), static_cast<std::size_t>(c));
              }
          out[((n * f.out_channels + o) * oh + y) * ow + x] = acc;
        }
  return out;
}

inline std::vector<double> maxpool_window_scan(const fenplan::FeatureTensor& in) {
  std::vector<double> out;
  for (std::size_t n = 0; n < in.n(); ++n)
    for (std::size_t c = 0; c < in.c(); ++c)
      for (std::size_t y = 0; y < in.h(); y += 2)
        for (std::size_t x = 0; x < in.w(); x += 2) {
          double m = -std::numeric_limits<double>::infinity();
          for (std::size_t dy = 0; dy < 2; ++dy)
            for (std::size_t dx = 0; dx < 2; ++dx) m = std::max(m, in.at(n, c, y + dy, x + dx));
          out.push_back(m);
        }
  return out;
}

// Counts the multiply-accumulates the loop nest above performs, including
// those that land on zero padding.
inline std::uint64_t count_macs(const fenplan::FilterBank& f, std::size_t h, std::size_t w) {
  std::uint64_t n = 0;
  const std::size_t oh = (h + 2 * f.padding - f.kernel_h) / f.stride + 1;
  const std::size_t ow = (w + 2 * f.padding - f.kernel_w) / f.stride + 1;
  for (std::size_t o = 0; o < f.out_channels; ++o)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x)
        for (std::size_t i = 0; i < f.in_channels; ++i)
          for (std::size_t r = 0; r < f.kernel_h; ++r)
            for (std::size_t c = 0; c < f.kernel_w; ++c) ++n;
  return n;
}

inline Eigen::MatrixXd to_eigen(const fenplan::Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) e(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = m(r, c);
  return e;
}

inline fenplan::Matrix from_eigen(const Eigen::MatrixXd& e) {
  fenplan::Matrix m(static_cast<std::size_t>(e.rows()), static_cast<std::size_t>(e.cols()));
  for (Eigen::Index r = 0; r < e.rows(); ++r)
    for (Eigen::Index c = 0; c < e.cols(); ++c) m(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = e(r, c);
  return m;
}

// Largest eigenvalue of (S_w + ridge I)^-1 S_b from the dense generalized
// symmetric-definite solver.
inline double generalized_max_eig(const fenplan::Matrix& sb, const fenplan::Matrix& sw, double ridge) {
  Eigen::MatrixXd b = to_eigen(sw);
  b += ridge * Eigen::MatrixXd::Identity(b.rows(), b.cols());
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(to_eigen(sb), b);
  return solver.eigenvalues().maxCoeff();
}

inline double max_eig_sym(const fenplan::Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(to_eigen(a));
  return solver.eigenvalues().maxCoeff();
}

// Scatter matrices summed term by term from their definitions.
inline void scatter_by_definition(const fenplan::Matrix& rows, const std::vector<int>& labels, bool weighted,
                                  Eigen::MatrixXd& sb, Eigen::MatrixXd& sw) {
  const auto dim = static_cast<Eigen::Index>(rows.cols());
  const Eigen::MatrixXd x = to_eigen(rows);
  const Eigen::VectorXd mean = x.colwise().mean().transpose();
  sb = Eigen::MatrixXd::Zero(dim, dim);
  sw = Eigen::MatrixXd::Zero(dim, dim);
  std::vector<int> classes(labels);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  for (int k : classes) {
    Eigen::VectorXd mk = Eigen::VectorXd::Zero(dim);
    double nk = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == k) {
        mk += x.row(static_cast<Eigen::Index>(i)).transpose();
        nk += 1;
      }
    mk /= nk;
    const Eigen::VectorXd d = mk - mean;
    sb += (weighted ? nk : 1.0) * d * d.transpose();
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == k) {
        const Eigen::VectorXd e = x.row(static_cast<Eigen::Index>(i)).transpose() - mk;
        sw += e * e.transpose();
      }
  }
}

// Per-image PSNR of the per-pixel training mean against every test image.
inline double mean_image_psnr(const fenplan::FeatureTensor& train, const fenplan::FeatureTensor& test,
                              double peak = 1.0, double cap = 60.0) {
  const std::size_t per = train.shape().sample_size();
  std::vector<double> mean(per, 0.0);
  for (std::size_t i = 0; i < train.n(); ++i)
    for (std::size_t k = 0; k < per; ++k) mean[k] += train.sample(i)[k];
  for (double& v : mean) v = std::clamp(v / static_cast<double>(train.n()), 0.0, peak);
  double total = 0.0;
  for (std::size_t i = 0; i < test.n(); ++i) {
    double se = 0.0;
    for (std::size_t k = 0; k < per; ++k) {
      const double d = mean[k] - test.sample(i)[k];
      se += d * d;
    }
    const double mse = se / static_cast<double>(per);
    total += mse == 0.0 ? cap : std::min(cap, 10.0 * std::log10(peak * peak / mse));
  }
  return total / static_cast<double>(test.n());
}

// Hand-encoded characterization table shaped like the worked example: PSNR
// falls with depth m and rises with output depth D'.
inline fenplan::CharacterizationTable worked_example_table() {
  const std::size_t ds[] = {1, 2, 4, 8, 16, 32, 64};
  const double psnr[6][7] = {
      {24.0, 26.0, 27.5, 29.5, 31.0, 33.0, 35.0},  // m = 1
      {22.0, 24.0, 26.0, 28.5, 30.0, 32.0, 34.0},  // m = 2
      {18.5, 20.0, 22.0, 24.0, 26.0, 28.0, 30.0},  // m = 3
      {16.5, 18.0, 20.0, 22.0, 24.0, 26.0, 28.0},  // m = 4
      {15.5, 16.5, 18.5, 20.0, 22.0, 24.0, 26.0},  // m = 5
      {14.0, 15.5, 16.8, 18.0, 19.5, 21.0, 22.5},  // m = 6
  };
  fenplan::CharacterizationTable t;
  t.provenance.dataset_id = "worked-example";
  for (std::size_t m = 1; m <= 6; ++m)
    for (std::size_t j = 0; j < 7; ++j) {
      fenplan::GridEntry e;
      e.m = m;
      e.d_prime = ds[j];
      e.psnr_mean = psnr[m - 1][j];
      e.utility_mean = 0.3 + 0.05 * static_cast<double>(m) + 0.02 * static_cast<double>(j);
      e.seeds = 20;
      e.macs = 1000000 * m * ds[j];
      e.bytes = 40000 * m * ds[j];
      t.grid.push_back(e);
    }
  return t;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("fenplan-" + tag + "-" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace oracle
