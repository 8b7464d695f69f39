#pragma once

#include <cstddef>

#include "fenplan/tensor.hpp"

namespace fenplan {

// Lower-triangular L with a = L L^T. Throws NumericError if a is not
// (numerically) symmetric positive definite.
Matrix cholesky(const Matrix& a);

// Solves L X = b and L^T X = b for lower-triangular L.
Matrix solve_lower(const Matrix& lower, const Matrix& b);
Matrix solve_lower_transposed(const Matrix& lower, const Matrix& b);

// X with a X = b for symmetric positive definite a (Cholesky).
Matrix solve_spd(const Matrix& a, const Matrix& b);

// Algebraically largest eigenvalue of a symmetric matrix by power iteration.
// Converged once ||A v - rho v|| <= tol * |rho|. When the dominant-magnitude
// eigenvalue is negative, a second pass runs on A - rho I. Throws
// ConvergenceError (carrying the best estimate) after max_iter steps.
double largest_eigenvalue_sym(const Matrix& a, double tol = 1e-10, std::size_t max_iter = 200000);

// (M + M^T) / 2.
Matrix symmetrized(const Matrix& m);

double max_asymmetry(const Matrix& m);

}  // namespace fenplan
