#include <gtest/gtest.h>

#include <cmath>

#include "fenplan/error.hpp"
#include "fenplan/linalg.hpp"
#include "oracles.hpp"

using namespace fenplan;

namespace {

Matrix random_spd(oracle::Draw& d, std::size_t n) {
  Matrix g(n, n);
  for (double& v : g.data()) v = d.normal();
  Matrix a = matmul_tn(g, g);
  for (std::size_t i = 0; i < n; ++i) a(i, i) += 0.5;
  return a;
}

Matrix random_symmetric(oracle::Draw& d, std::size_t n) {
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) a(i, j) = a(j, i) = d.normal();
  return a;
}

}  // namespace

TEST(SolveSpd, IdentityReturnsRhs) {
  Matrix b(3, 2, std::vector<double>{1, 2, 3, 4, 5, 6});
  EXPECT_EQ(solve_spd(Matrix::identity(3), b), b);
}

TEST(SolveSpd, Diagonal) {
  const Matrix a(2, 2, std::vector<double>{2, 0, 0, 4});
  const Matrix x = solve_spd(a, Matrix(2, 1, std::vector<double>{2, 4}));
  EXPECT_DOUBLE_EQ(x(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(x(1, 0), 1.0);
}

TEST(SolveSpd, ResidualOnRandomSpd) {
  oracle::Draw d(77);
  for (int t = 0; t < 20; ++t) {
    const Matrix a = random_spd(d, 8);
    Matrix b(8, 3);
    for (double& v : b.data()) v = d.normal();
    const Matrix x = solve_spd(a, b);
    EXPECT_LE((matmul(a, x) - b).frobenius_norm(), 1e-8 * b.frobenius_norm());
  }
}

TEST(SolveSpd, RejectsIndefinite) {
  const Matrix a(2, 2, std::vector<double>{1, 2, 2, 1});
  EXPECT_THROW(solve_spd(a, Matrix::identity(2)), NumericError);
}

TEST(Cholesky, ReproducesInput) {
  oracle::Draw d(12);
  const Matrix a = random_spd(d, 6);
  const Matrix l = cholesky(a);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = i + 1; j < 6; ++j) EXPECT_EQ(l(i, j), 0.0);
  EXPECT_LE((matmul(l, l.transposed()) - a).frobenius_norm(), 1e-12 * a.frobenius_norm());
}

TEST(LargestEigenvalue, Diagonal) {
  EXPECT_NEAR(largest_eigenvalue_sym(Matrix(2, 2, std::vector<double>{3, 0, 0, 1})), 3.0, 1e-10);
}

TEST(LargestEigenvalue, TwoByTwoAnalytic) {
  EXPECT_NEAR(largest_eigenvalue_sym(Matrix(2, 2, std::vector<double>{2, 1, 1, 2})), 3.0, 3e-10);
}

TEST(LargestEigenvalue, NegativeDominantMagnitude) {
  // Eigenvalues -5 and 1: the algebraically largest is 1.
  EXPECT_NEAR(largest_eigenvalue_sym(Matrix(2, 2, std::vector<double>{-5, 0, 0, 1})), 1.0, 1e-9);
}

TEST(LargestEigenvalue, ZeroMatrix) { EXPECT_EQ(largest_eigenvalue_sym(Matrix(3, 3)), 0.0); }

TEST(LargestEigenvalue, MatchesDenseSolverOnRandomSymmetric) {
  oracle::Draw d(31);
  for (int t = 0; t < 30; ++t) {
    const Matrix a = random_symmetric(d, 10);
    const double want = oracle::max_eig_sym(a);
    EXPECT_LE(std::abs(largest_eigenvalue_sym(a) - want), 1e-8 * std::max(1.0, std::abs(want))) << "trial " << t;
  }
}

TEST(LargestEigenvalue, BoundsRayleighQuotient) {
  oracle::Draw d(32);
  for (int t = 0; t < 30; ++t) {
    const Matrix a = random_symmetric(d, 7);
    const double lambda = largest_eigenvalue_sym(a);
    Matrix v(7, 1);
    for (double& x : v.data()) x = d.normal();
    const double num = matmul_tn(v, matmul(a, v))(0, 0);
    const double den = matmul_tn(v, v)(0, 0);
    EXPECT_GE(lambda, num / den - 1e-8 * std::max(1.0, std::abs(lambda)));
  }
}

TEST(LargestEigenvalue, ReportsNonConvergenceWithEstimate) {
  oracle::Draw d(33);
  const Matrix a = random_symmetric(d, 10);
  try {
    largest_eigenvalue_sym(a, 1e-15, 2);
    FAIL() << "expected ConvergenceError";
  } catch (const ConvergenceError& e) {
    EXPECT_TRUE(std::isfinite(e.best_estimate()));
  }
}
