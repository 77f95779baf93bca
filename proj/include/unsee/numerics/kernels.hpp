#pragma once

#include "unsee/numerics/matrix.hpp"

// Dense kernels used on every training step. The default entry points are
// OpenMP-parallel over output rows; `reference::` holds the plain serial loops
// they are tested against. Each output entry is accumulated in the same order
// by both, so results agree bitwise regardless of thread count.
namespace unsee::kernels {

// A * B
Matrix matmul(const Matrix& a, const Matrix& b);
// A^T * B
Matrix matmul_tn(const Matrix& a, const Matrix& b);
// A * B^T
Matrix matmul_nt(const Matrix& a, const Matrix& b);

// Column means (1 x cols).
std::vector<double> column_means(const Matrix& m);
// M with the column means subtracted.
Matrix center_columns(const Matrix& m);
// (1/divisor) * (Ma - mean)^T (Mb - mean); a == b gives a covariance.
Matrix centered_cross_product(const Matrix& a, const Matrix& b, double divisor);

// Number of threads the parallel kernels will use (1 without OpenMP).
int max_threads();

namespace reference {

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
std::vector<double> column_means(const Matrix& m);
Matrix centered_cross_product(const Matrix& a, const Matrix& b, double divisor);

}  // namespace reference

}  // namespace unsee::kernels
