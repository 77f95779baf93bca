#include "unsee/numerics/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "unsee/error.hpp"
#include "unsee/numerics/kernels.hpp"
#include "unsee/numerics/linalg.hpp"

namespace unsee {

Standardized column_standardize_full(const Matrix& m, double eps) {
  require(m.rows() >= 2, ErrorKind::DegenerateBatch,
          "column_standardize: need at least 2 rows, got " + std::to_string(m.rows()));
  require(eps >= 0.0, ErrorKind::InvalidArgument, "column_standardize: eps must be >= 0");
  const std::size_t rows = m.rows();
  const std::size_t cols = m.cols();
  Standardized out{Matrix(rows, cols), kernels::column_means(m), std::vector<double>(cols), eps};
  for (std::size_t j = 0; j < cols; ++j) {
    double ss = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      const double c = m(r, j) - out.mean[j];
      ss += c * c;
    }
    out.std[j] = std::sqrt(ss / static_cast<double>(rows));
    const double denom = out.std[j] + eps;
    if (denom == 0.0) continue;  // constant column, eps == 0: leave zeros
    for (std::size_t r = 0; r < rows; ++r) out.z(r, j) = (m(r, j) - out.mean[j]) / denom;
  }
  return out;
}

Matrix column_standardize(const Matrix& m, double eps) {
  return column_standardize_full(m, eps).z;
}

Matrix column_standardize_backward(const Standardized& fwd, const Matrix& input,
                                   const Matrix& grad_out) {
  require(input.same_shape(grad_out) && input.same_shape(fwd.z), ErrorKind::ShapeMismatch,
          "column_standardize_backward: shape mismatch");
  const std::size_t rows = input.rows();
  const double b = static_cast<double>(rows);
  Matrix grad(rows, input.cols());
  for (std::size_t j = 0; j < input.cols(); ++j) {
    const double s = fwd.std[j];
    const double t = s + fwd.eps;
    if (t == 0.0) continue;
    double g_mean = 0.0;
    double g_dot_c = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      g_mean += grad_out(r, j);
      g_dot_c += grad_out(r, j) * (input(r, j) - fwd.mean[j]);
    }
    g_mean /= b;
    const double std_term = s > 0.0 ? g_dot_c / (t * t * b * s) : 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      const double c = input(r, j) - fwd.mean[j];
      grad(r, j) = (grad_out(r, j) - g_mean) / t - std_term * c;
    }
  }
  return grad;
}

Matrix cross_correlation(const Matrix& za, const Matrix& zb) {
  require(za.same_shape(zb), ErrorKind::ShapeMismatch,
          "cross_correlation: views have different shapes");
  require(za.rows() >= 1, ErrorKind::DegenerateBatch, "cross_correlation: empty batch");
  Matrix c = kernels::matmul_tn(za, zb);
  const double b = static_cast<double>(za.rows());
  for (double& v : c.values()) v /= b;
  return c;
}

Matrix covariance(const Matrix& z) {
  require(z.rows() >= 2, ErrorKind::DegenerateBatch,
          "covariance: need at least 2 rows, got " + std::to_string(z.rows()));
  return kernels::centered_cross_product(z, z, static_cast<double>(z.rows() - 1));
}

SpectrumReport effective_rank(const Matrix& z) {
  require(z.rows() >= 2, ErrorKind::DegenerateBatch, "effective_rank: need at least 2 rows");
  require(z.cols() >= 1, ErrorKind::InvalidArgument, "effective_rank: need at least 1 column");
  const Matrix cov = covariance(z);
  SpectrumReport report;

  double std_sum = 0.0;
  for (std::size_t j = 0; j < cov.rows(); ++j) std_sum += std::sqrt(std::max(0.0, cov(j, j)));
  report.mean_dim_std = std_sum / static_cast<double>(cov.rows());

  const SymmetricEigen eig = symmetric_eigen(cov);
  report.eigenvalues.reserve(eig.values.size());
  for (double v : eig.values) report.eigenvalues.push_back(std::max(0.0, v));

  const double top = report.eigenvalues.empty() ? 0.0 : report.eigenvalues.front();
  const double cutoff = 1e-12 * std::max(1.0, top);
  double total = 0.0;
  for (double v : report.eigenvalues)
    if (v >= cutoff) total += v;
  if (total <= 0.0) {
    report.effective_rank = 1.0;
    return report;
  }
  double entropy = 0.0;
  for (double v : report.eigenvalues) {
    if (v < cutoff) continue;
    const double p = v / total;
    entropy -= p * std::log(p);
  }
  report.effective_rank = std::exp(entropy);
  return report;
}

std::vector<double> average_ranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), ErrorKind::ShapeMismatch,
          "spearman: sequences differ in length (" + std::to_string(x.size()) + " vs " +
              std::to_string(y.size()) + ")");
  require(x.size() >= 2, ErrorKind::DegenerateBatch, "spearman: need at least 2 values");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(rx.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  require(sxx > 0.0, ErrorKind::UndefinedCorrelation, "spearman: first argument has no rank variance");
  require(syy > 0.0, ErrorKind::UndefinedCorrelation, "spearman: second argument has no rank variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

Matrix finite_diff_grad(const MatrixFunction& f, const Matrix& x, double h) {
  require(h > 0.0, ErrorKind::InvalidArgument, "finite_diff_grad: h must be > 0");
  Matrix grad(x.rows(), x.cols());
  Matrix probe = x;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      const double orig = probe(i, j);
      probe(i, j) = orig + h;
      const double fp = f(probe);
      probe(i, j) = orig - h;
      const double fm = f(probe);
      probe(i, j) = orig;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        std::ostringstream os;
        os << "finite_diff_grad: non-finite evaluation at index (" << i << ", " << j << ")";
        fail(ErrorKind::NonFinite, os.str());
      }
      grad(i, j) = (fp - fm) / (2.0 * h);
    }
  }
  return grad;
}

double gradient_relative_error(const Matrix& analytic, const Matrix& numeric, double floor) {
  const double scale = std::max({max_abs(analytic), max_abs(numeric), floor});
  return max_abs_diff(analytic, numeric) / scale;
}

}  // namespace unsee
