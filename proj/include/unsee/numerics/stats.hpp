#pragma once

#include <functional>
#include <span>
#include <vector>

#include "unsee/numerics/matrix.hpp"

namespace unsee {

struct Standardized {
  Matrix z;
  std::vector<double> mean;
  std::vector<double> std;  // population std (divisor = rows)
  double eps = 0.0;
};

// (M - mean) / (std + eps) per column, population std. A zero-variance
// column maps to zeros. Requires rows >= 2.
Standardized column_standardize_full(const Matrix& m, double eps);
Matrix column_standardize(const Matrix& m, double eps);

// Gradient w.r.t. the input of column_standardize given the gradient w.r.t.
// its output. The batch mean and std are treated as functions of the input.
Matrix column_standardize_backward(const Standardized& fwd, const Matrix& input,
                                   const Matrix& grad_out);

// (1/B) Za^T Zb for already-standardized views.
Matrix cross_correlation(const Matrix& za, const Matrix& zb);

// Unbiased sample covariance (1/(B-1)) (Z - mean)^T (Z - mean).
Matrix covariance(const Matrix& z);

struct SpectrumReport {
  std::vector<double> eigenvalues;  // covariance eigenvalues, descending, >= 0
  double effective_rank = 1.0;
  double mean_dim_std = 0.0;
};

// exp(entropy) of the normalized covariance spectrum.
SpectrumReport effective_rank(const Matrix& z);

// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

// Average (fractional) ranks, 1-based.
std::vector<double> average_ranks(std::span<const double> x);

using MatrixFunction = std::function<double(const Matrix&)>;

// Central differences (f(X + h E_ij) - f(X - h E_ij)) / 2h for every entry.
Matrix finite_diff_grad(const MatrixFunction& f, const Matrix& x, double h);

// max|analytic - numeric| / max(max|analytic|, max|numeric|, floor).
double gradient_relative_error(const Matrix& analytic, const Matrix& numeric,
                               double floor = 1e-7);

}  // namespace unsee
