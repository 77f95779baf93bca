#include "unsee/numerics/kernels.hpp"

#include <string>

#include "unsee/error.hpp"

#ifdef UNSEE_HAVE_OPENMP
#include <omp.h>
#endif

namespace unsee::kernels {

namespace {

std::string dims(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void check_inner(std::size_t lhs, std::size_t rhs, const char* op, const Matrix& a,
                 const Matrix& b) {
  require(lhs == rhs, ErrorKind::ShapeMismatch,
          std::string(op) + ": incompatible shapes " + dims(a) + " and " + dims(b));
}

// Signed loop indices for OpenMP 2.0-style `parallel for`.
using Index = long long;

}  // namespace

int max_threads() {
#ifdef UNSEE_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.rows(), "matmul", a, b);
  Matrix c(a.rows(), b.cols());
  const Index n = static_cast<Index>(a.rows());
  const std::size_t inner = a.cols();
  const std::size_t m = b.cols();
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) {
    auto out = c.row(static_cast<std::size_t>(i));
    for (std::size_t k = 0; k < inner; ++k) {
      const double aik = a(static_cast<std::size_t>(i), k);
      const auto brow = b.row(k);
      for (std::size_t j = 0; j < m; ++j) out[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  check_inner(a.rows(), b.rows(), "matmul_tn", a, b);
  Matrix c(a.cols(), b.cols());
  const Index n = static_cast<Index>(a.cols());
  const std::size_t inner = a.rows();
  const std::size_t m = b.cols();
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) {
    auto out = c.row(static_cast<std::size_t>(i));
    for (std::size_t k = 0; k < inner; ++k) {
      const double aki = a(k, static_cast<std::size_t>(i));
      const auto brow = b.row(k);
      for (std::size_t j = 0; j < m; ++j) out[j] += aki * brow[j];
    }
  }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.cols(), "matmul_nt", a, b);
  Matrix c(a.rows(), b.rows());
  const Index n = static_cast<Index>(a.rows());
  const std::size_t inner = a.cols();
  const std::size_t m = b.rows();
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) {
    const auto arow = a.row(static_cast<std::size_t>(i));
    auto out = c.row(static_cast<std::size_t>(i));
    for (std::size_t j = 0; j < m; ++j) {
      const auto brow = b.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < inner; ++k) s += arow[k] * brow[k];
      out[j] = s;
    }
  }
  return c;
}

std::vector<double> column_means(const Matrix& m) {
  std::vector<double> mean(m.cols(), 0.0);
  if (m.rows() == 0) return mean;
  const Index cols = static_cast<Index>(m.cols());
#pragma omp parallel for schedule(static)
  for (Index j = 0; j < cols; ++j) {
    double s = 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r) s += m(r, static_cast<std::size_t>(j));
    mean[static_cast<std::size_t>(j)] = s / static_cast<double>(m.rows());
  }
  return mean;
}

Matrix center_columns(const Matrix& m) {
  const auto mean = column_means(m);
  Matrix c = m;
  for (std::size_t r = 0; r < c.rows(); ++r)
    for (std::size_t j = 0; j < c.cols(); ++j) c(r, j) -= mean[j];
  return c;
}

Matrix centered_cross_product(const Matrix& a, const Matrix& b, double divisor) {
  require(a.rows() == b.rows(), ErrorKind::ShapeMismatch,
          "centered_cross_product: row counts differ (" + dims(a) + " vs " + dims(b) + ")");
  Matrix c = matmul_tn(center_columns(a), center_columns(b));
  for (double& v : c.values()) v /= divisor;
  return c;
}

namespace reference {

Matrix matmul(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.rows(), "matmul", a, b);
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k)
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += a(i, k) * b(k, j);
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  check_inner(a.rows(), b.rows(), "matmul_tn", a, b);
  Matrix c(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.cols(); ++i)
    for (std::size_t k = 0; k < a.rows(); ++k)
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += a(k, i) * b(k, j);
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.cols(), "matmul_nt", a, b);
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
      c(i, j) = s;
    }
  return c;
}

std::vector<double> column_means(const Matrix& m) {
  std::vector<double> mean(m.cols(), 0.0);
  if (m.rows() == 0) return mean;
  for (std::size_t j = 0; j < m.cols(); ++j) {
    double s = 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r) s += m(r, j);
    mean[j] = s / static_cast<double>(m.rows());
  }
  return mean;
}

Matrix centered_cross_product(const Matrix& a, const Matrix& b, double divisor) {
  require(a.rows() == b.rows(), ErrorKind::ShapeMismatch, "centered_cross_product: row counts differ");
  const auto ma = column_means(a);
  const auto mb = column_means(b);
  Matrix c(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.cols(); ++i)
    for (std::size_t k = 0; k < a.rows(); ++k)
      for (std::size_t j = 0; j < b.cols(); ++j)
        c(i, j) += (a(k, i) - ma[i]) * (b(k, j) - mb[j]);
  for (double& v : c.values()) v /= divisor;
  return c;
}

}  // namespace reference

}  // namespace unsee::kernels
