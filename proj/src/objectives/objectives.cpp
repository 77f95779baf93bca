#include "unsee/objectives/objectives.hpp"

#include <cmath>
#include <string>

#include "unsee/error.hpp"
#include "unsee/numerics/kernels.hpp"
#include "unsee/numerics/linalg.hpp"
#include "unsee/numerics/stats.hpp"

namespace unsee {

std::optional<double> LossOutput::component(std::string_view name) const {
  for (const auto& c : components)
    if (c.name == name) return c.value;
  return std::nullopt;
}

CorInfoMaxState CorInfoMaxState::initial(std::size_t dim, double r_ini) {
  CorInfoMaxState s;
  s.r_a = Matrix::identity(dim) * r_ini;
  s.r_b = s.r_a;
  s.mu_a = Matrix(1, dim);
  s.mu_b = Matrix(1, dim);
  return s;
}

namespace {

void check_views(const Matrix& za, const Matrix& zb, const char* op) {
  require(za.same_shape(zb), ErrorKind::ShapeMismatch,
          std::string(op) + ": views differ in shape (" + std::to_string(za.rows()) + "x" +
              std::to_string(za.cols()) + " vs " + std::to_string(zb.rows()) + "x" +
              std::to_string(zb.cols()) + ")");
  require(za.rows() >= 2, ErrorKind::DegenerateBatch,
          std::string(op) + ": need a batch of at least 2 rows, got " + std::to_string(za.rows()));
}

double sum_loss(const std::vector<LossComponent>& components) {
  double s = 0.0;
  for (const auto& c : components) s += c.weight * c.value;
  return s;
}

// Mean squared difference over all entries, and its gradient w.r.t. za
// (the gradient w.r.t. zb is the negation).
double mean_sq_diff(const Matrix& za, const Matrix& zb, Matrix* grad, double weight) {
  const double n = static_cast<double>(za.size());
  double s = 0.0;
  for (std::size_t i = 0; i < za.size(); ++i) {
    const double diff = za.values()[i] - zb.values()[i];
    s += diff * diff;
    if (grad) grad->values()[i] += weight * 2.0 * diff / n;
  }
  return s / n;
}

struct VicregView {
  double variance = 0.0;
  double covariance = 0.0;
};

// Variance-hinge and off-diagonal covariance terms for one view; accumulates
// their weighted gradients into `grad`.
VicregView vicreg_regularizers(const Matrix& z, const VicregConfig& cfg, Matrix& grad) {
  const std::size_t b = z.rows();
  const std::size_t d = z.cols();
  const double dd = static_cast<double>(d);
  const double bm1 = static_cast<double>(b - 1);
  const Matrix centered = kernels::center_columns(z);
  Matrix cov = kernels::matmul_tn(centered, centered);
  for (double& v : cov.values()) v /= bm1;

  VicregView out;
  std::vector<double> std_dev(d);
  for (std::size_t j = 0; j < d; ++j) {
    std_dev[j] = std::sqrt(cov(j, j) + cfg.eps);
    out.variance += std::max(0.0, cfg.gamma - std_dev[j]);
  }
  out.variance /= dd;

  Matrix g_cov(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      if (i == j) continue;
      out.covariance += cov(i, j) * cov(i, j);
      g_cov(i, j) = 2.0 * cov(i, j) / dd;
    }
  out.covariance /= dd;

  const Matrix cov_grad = kernels::matmul(centered, g_cov);
  for (std::size_t r = 0; r < b; ++r)
    for (std::size_t j = 0; j < d; ++j) {
      double g = cfg.w_cov * 2.0 * cov_grad(r, j) / bm1;
      if (std_dev[j] < cfg.gamma) g -= cfg.w_var * centered(r, j) / (dd * std_dev[j] * bm1);
      grad(r, j) += g;
    }
  return out;
}

}  // namespace

LossOutput barlow_twins_loss(const Matrix& za, const Matrix& zb, double lambda, double eps) {
  check_views(za, zb, "barlow_twins_loss");
  require(lambda >= 0.0, ErrorKind::InvalidArgument, "barlow_twins_loss: lambda must be >= 0");
  const auto sa = column_standardize_full(za, eps);
  const auto sb = column_standardize_full(zb, eps);
  const Matrix c = cross_correlation(sa.z, sb.z);
  const std::size_t d = c.rows();

  double on_diag = 0.0, off_diag = 0.0;
  Matrix g(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      if (i == j) {
        const double r = 1.0 - c(i, i);
        on_diag += r * r;
        g(i, i) = -2.0 * r;
      } else {
        off_diag += c(i, j) * c(i, j);
        g(i, j) = 2.0 * lambda * c(i, j);
      }
    }

  const double inv_b = 1.0 / static_cast<double>(za.rows());
  Matrix dza_hat = kernels::matmul_nt(sb.z, g) * inv_b;
  Matrix dzb_hat = kernels::matmul(sa.z, g) * inv_b;

  LossOutput out;
  out.components = {{"invariance", 1.0, on_diag}, {"covariance", lambda, off_diag}};
  out.loss = sum_loss(out.components);
  out.grad_a = column_standardize_backward(sa, za, dza_hat);
  out.grad_b = column_standardize_backward(sb, zb, dzb_hat);
  return out;
}

LossOutput vicreg_loss(const Matrix& za, const Matrix& zb, const VicregConfig& cfg) {
  check_views(za, zb, "vicreg_loss");
  LossOutput out;
  out.grad_a = Matrix(za.rows(), za.cols());
  out.grad_b = Matrix(zb.rows(), zb.cols());

  const double inv = mean_sq_diff(za, zb, &out.grad_a, cfg.w_inv);
  for (std::size_t i = 0; i < out.grad_b.size(); ++i) out.grad_b.values()[i] = -out.grad_a.values()[i];

  const VicregView va = vicreg_regularizers(za, cfg, out.grad_a);
  const VicregView vb = vicreg_regularizers(zb, cfg, out.grad_b);

  out.components = {{"invariance", cfg.w_inv, inv},
                    {"variance", cfg.w_var, va.variance + vb.variance},
                    {"covariance", cfg.w_cov, va.covariance + vb.covariance}};
  out.loss = sum_loss(out.components);
  return out;
}

std::pair<LossOutput, CorInfoMaxState> corinfomax_loss(const Matrix& za, const Matrix& zb,
                                                       const CorInfoMaxState& state,
                                                       const CorInfoMaxConfig& cfg) {
  check_views(za, zb, "corinfomax_loss");
  const std::size_t b = za.rows();
  const std::size_t d = za.cols();
  require(state.dim() == d && state.r_b.rows() == d && state.mu_a.cols() == d &&
              state.mu_b.cols() == d,
          ErrorKind::ShapeMismatch,
          "corinfomax_loss: state has dimension " + std::to_string(state.dim()) +
              ", embeddings have " + std::to_string(d));

  const bool fresh = cfg.orientation == EmaOrientation::FreshWeight;
  const double r_new_w = fresh ? cfg.la_r : 1.0 - cfg.la_r;
  const double mu_new_w = fresh ? cfg.la_mu : 1.0 - cfg.la_mu;
  const double eps = cfg.r_eps_weight * static_cast<double>(d);
  const double bb = static_cast<double>(b);

  CorInfoMaxState next;
  next.step = state.step + 1;

  LossOutput out;
  out.grad_a = Matrix(b, d);
  out.grad_b = Matrix(b, d);
  const double inv = mean_sq_diff(za, zb, &out.grad_a, cfg.w_inv);
  for (std::size_t i = 0; i < out.grad_b.size(); ++i) out.grad_b.values()[i] = -out.grad_a.values()[i];

  auto update_view = [&](const Matrix& z, const Matrix& r_old, const Matrix& mu_old, Matrix& r_out,
                         Matrix& mu_out, Matrix& grad) {
    const auto batch_mean = kernels::column_means(z);
    mu_out = Matrix(1, d);
    for (std::size_t j = 0; j < d; ++j)
      mu_out(0, j) = (1.0 - mu_new_w) * mu_old(0, j) + mu_new_w * batch_mean[j];

    const Matrix centered = kernels::center_columns(z);
    Matrix r_batch = kernels::matmul_tn(centered, centered);
    for (double& v : r_batch.values()) v /= bb;
    r_out = Matrix(d, d);
    for (std::size_t i = 0; i < r_out.size(); ++i)
      r_out.values()[i] = (1.0 - r_new_w) * r_old.values()[i] + r_new_w * r_batch.values()[i];

    const double logdet = logdet_psd(r_out, eps);
    const Matrix s = inverse_spd(r_out, eps);
    const Matrix cs = kernels::matmul(centered, s);
    const double scale = -cfg.w_cov * r_new_w * 2.0 / bb;
    for (std::size_t i = 0; i < grad.size(); ++i) grad.values()[i] += scale * cs.values()[i];
    return logdet;
  };

  const double logdet_a = update_view(za, state.r_a, state.mu_a, next.r_a, next.mu_a, out.grad_a);
  const double logdet_b = update_view(zb, state.r_b, state.mu_b, next.r_b, next.mu_b, out.grad_b);

  out.components = {{"invariance", cfg.w_inv, inv}, {"covariance", -cfg.w_cov, logdet_a + logdet_b}};
  out.loss = sum_loss(out.components);
  return {std::move(out), std::move(next)};
}

LossOutput byol_loss(const Matrix& p, const Matrix& t) {
  require(p.same_shape(t), ErrorKind::ShapeMismatch, "byol_loss: predictions and targets differ in shape");
  require(p.rows() >= 1, ErrorKind::DegenerateBatch, "byol_loss: empty batch");
  const std::size_t b = p.rows();
  const std::size_t d = p.cols();
  LossOutput out;
  out.grad_a = Matrix(b, d);
  out.grad_b = Matrix(b, d);

  double total = 0.0;
  std::vector<double> ph(d), th(d);
  for (std::size_t r = 0; r < b; ++r) {
    double np = 0.0, nt = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      np += p(r, j) * p(r, j);
      nt += t(r, j) * t(r, j);
    }
    np = std::sqrt(np);
    nt = std::sqrt(nt);
    require(np > 0.0, ErrorKind::InvalidArgument, "byol_loss: prediction row " + std::to_string(r) + " has zero norm");
    require(nt > 0.0, ErrorKind::InvalidArgument, "byol_loss: target row " + std::to_string(r) + " has zero norm");
    double cos = 0.0, sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      ph[j] = p(r, j) / np;
      th[j] = t(r, j) / nt;
      cos += ph[j] * th[j];
      sq += (ph[j] - th[j]) * (ph[j] - th[j]);
    }
    total += sq;
    const double scale = 2.0 / (static_cast<double>(b) * np);
    for (std::size_t j = 0; j < d; ++j) out.grad_a(r, j) = scale * (ph[j] * cos - th[j]);
  }
  out.components = {{"invariance", 1.0, total / static_cast<double>(b)}};
  out.loss = sum_loss(out.components);
  return out;
}

std::string_view to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::BarlowTwins: return "barlow_twins";
    case ObjectiveKind::Vicreg: return "vicreg";
    case ObjectiveKind::CorInfoMax: return "corinfomax";
    case ObjectiveKind::Byol: return "byol";
  }
  return "unknown";
}

ObjectiveKind parse_objective(std::string_view name) {
  for (auto k : {ObjectiveKind::BarlowTwins, ObjectiveKind::Vicreg, ObjectiveKind::CorInfoMax,
                 ObjectiveKind::Byol})
    if (to_string(k) == name) return k;
  fail(ErrorKind::Config, "unknown objective '" + std::string(name) +
                              "' (expected barlow_twins, vicreg, corinfomax or byol)");
}

Objective::Objective(ObjectiveConfig cfg, std::size_t dim) : cfg_(cfg) {
  if (cfg_.kind == ObjectiveKind::CorInfoMax)
    state_ = CorInfoMaxState::initial(dim, cfg_.corinfomax.r_ini);
}

void Objective::set_state(CorInfoMaxState state) { state_ = std::move(state); }

LossOutput Objective::evaluate(const Matrix& za, const Matrix& zb) {
  switch (cfg_.kind) {
    case ObjectiveKind::BarlowTwins: return barlow_twins_loss(za, zb, cfg_.barlow);
    case ObjectiveKind::Vicreg: return vicreg_loss(za, zb, cfg_.vicreg);
    case ObjectiveKind::Byol: return byol_loss(za, zb);
    case ObjectiveKind::CorInfoMax: {
      auto [out, next] = corinfomax_loss(za, zb, *state_, cfg_.corinfomax);
      state_ = std::move(next);
      return out;
    }
  }
  fail(ErrorKind::InvalidArgument, "unknown objective kind");
}

}  // namespace unsee
