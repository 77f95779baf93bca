#pragma once

#include <vector>

#include "unsee/numerics/matrix.hpp"

namespace unsee {

// Lower-triangular L with M = L L^T. Throws SingularMatrix naming the first
// non-positive pivot.
Matrix cholesky(const Matrix& m);

// log det(M + eps*I) for symmetric M, via 2 * sum(log diag(L)).
double logdet_psd(const Matrix& m, double eps);

// (M + eps*I)^{-1} for symmetric positive definite M + eps*I.
Matrix inverse_spd(const Matrix& m, double eps = 0.0);

struct SymmetricEigen {
  std::vector<double> values;  // descending
  Matrix vectors;              // column k pairs with values[k]
};

// Cyclic Jacobi. Sweeps until the off-diagonal Frobenius norm falls below
// 1e-11 relative to the matrix norm.
SymmetricEigen symmetric_eigen(const Matrix& m);

}  // namespace unsee
