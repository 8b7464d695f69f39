#include "fenplan/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fenplan/error.hpp"
#include "fenplan/rng.hpp"

namespace fenplan {

namespace {

void require_square(const Matrix& a, const char* who) {
  if (a.rows() != a.cols()) {
    throw DimensionError(std::string(who) + ": matrix is " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + ", expected square");
  }
}

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void multiply(const Matrix& a, const std::vector<double>& v, std::vector<double>& out) {
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto row = a.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += row[j] * v[j];
    out[i] = s;
  }
}

struct PowerResult {
  double value;
  bool converged;
};

// Dominant-magnitude eigenvalue of a + shift * I.
PowerResult power_iterate(const Matrix& a, double shift, double tol, std::size_t max_iter) {
  const std::size_t n = a.rows();
  // Fixed start vector so results are reproducible.
  Rng rng(0x5eed5eedULL);
  std::vector<double> v(n);
  for (double& x : v) x = 1.0 + 0.1 * rng.uniform(-1.0, 1.0);
  double nv = norm2(v);
  for (double& x : v) x /= nv;

  std::vector<double> av(n);
  double rho = 0.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    multiply(a, v, av);
    for (std::size_t i = 0; i < n; ++i) av[i] += shift * v[i];
    rho = 0.0;
    for (std::size_t i = 0; i < n; ++i) rho += v[i] * av[i];
    double resid = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = av[i] - rho * v[i];
      resid += r * r;
    }
    resid = std::sqrt(resid);
    if (resid <= tol * std::abs(rho)) return {rho, true};
    const double nav = norm2(av);
    if (nav == 0.0) return {0.0, true};  // v lies in the null space; A v = 0
    for (std::size_t i = 0; i < n; ++i) v[i] = av[i] / nav;
  }
  return {rho, false};
}

}  // namespace

Matrix cholesky(const Matrix& a) {
  require_square(a, "cholesky");
  const std::size_t n = a.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw NumericError("cholesky: matrix is not positive definite (pivot " + std::to_string(j) +
                         " = " + std::to_string(d) + ")");
    }
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

Matrix solve_lower(const Matrix& lower, const Matrix& b) {
  require_square(lower, "solve_lower");
  if (b.rows() != lower.rows()) throw DimensionError("solve_lower: rhs row count mismatch");
  const std::size_t n = lower.rows();
  Matrix x = b;
  for (std::size_t i = 0; i < n; ++i) {
    auto xi = x.row(i);
    for (std::size_t k = 0; k < i; ++k) {
      const double lik = lower(i, k);
      if (lik == 0.0) continue;
      auto xk = x.row(k);
      for (std::size_t c = 0; c < x.cols(); ++c) xi[c] -= lik * xk[c];
    }
    const double d = lower(i, i);
    for (double& v : xi) v /= d;
  }
  return x;
}

Matrix solve_lower_transposed(const Matrix& lower, const Matrix& b) {
  require_square(lower, "solve_lower_transposed");
  if (b.rows() != lower.rows()) throw DimensionError("solve_lower_transposed: rhs row count mismatch");
  const std::size_t n = lower.rows();
  Matrix x = b;
  for (std::size_t ii = n; ii-- > 0;) {
    auto xi = x.row(ii);
    for (std::size_t k = ii + 1; k < n; ++k) {
      const double lki = lower(k, ii);
      if (lki == 0.0) continue;
      auto xk = x.row(k);
      for (std::size_t c = 0; c < x.cols(); ++c) xi[c] -= lki * xk[c];
    }
    const double d = lower(ii, ii);
    for (double& v : xi) v /= d;
  }
  return x;
}

Matrix solve_spd(const Matrix& a, const Matrix& b) {
  require_square(a, "solve_spd");
  if (b.rows() != a.rows()) {
    throw DimensionError("solve_spd: a is " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " but b has " + std::to_string(b.rows()) + " rows");
  }
  const Matrix l = cholesky(a);
  return solve_lower_transposed(l, solve_lower(l, b));
}

double largest_eigenvalue_sym(const Matrix& a, double tol, std::size_t max_iter) {
  require_square(a, "largest_eigenvalue_sym");
  if (a.rows() == 0) throw DimensionError("largest_eigenvalue_sym: empty matrix");
  if (!a.all_finite()) throw NonFiniteError("largest_eigenvalue_sym: matrix contains NaN or Inf");

  const PowerResult first = power_iterate(a, 0.0, tol, max_iter);
  if (first.converged && first.value >= 0.0) return first.value;

  // Either the dominant eigenvalue is negative or +/- eigenvalues tie in
  // magnitude. Shift so the spectrum is nonnegative; the top of the shifted
  // spectrum is then the algebraically largest eigenvalue.
  double shift = 0.0;
  if (first.converged) {
    shift = -first.value;
  } else {
    for (std::size_t i = 0; i < a.rows(); ++i) {
      double radius = 0.0;
      for (std::size_t j = 0; j < a.cols(); ++j)
        if (j != i) radius += std::abs(a(i, j));
      shift = std::max(shift, radius - a(i, i));
    }
  }
  const PowerResult second = power_iterate(a, shift, tol, max_iter);
  const double value = second.value - shift;
  if (!second.converged) {
    throw ConvergenceError("largest_eigenvalue_sym: no convergence after " +
                               std::to_string(max_iter) + " iterations",
                           value);
  }
  return value;
}

Matrix symmetrized(const Matrix& m) {
  require_square(m, "symmetrized");
  Matrix s(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) s(i, j) = 0.5 * (m(i, j) + m(j, i));
  return s;
}

double max_asymmetry(const Matrix& m) {
  require_square(m, "max_asymmetry");
  double worst = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j) worst = std::max(worst, std::abs(m(i, j) - m(j, i)));
  return worst;
}

}  // namespace fenplan
