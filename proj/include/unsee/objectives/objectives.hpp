#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "unsee/numerics/matrix.hpp"

namespace unsee {

struct LossComponent {
  std::string name;  // "invariance", "variance", "covariance"
  double weight = 1.0;
  double value = 0.0;
};

// loss == sum(weight * value) over components.
struct LossOutput {
  double loss = 0.0;
  Matrix grad_a;
  Matrix grad_b;
  std::vector<LossComponent> components;

  std::optional<double> component(std::string_view name) const;
};

// Hyperparameters kept from the original objectives (0.0051; 25/25/1;
// R_ini=1, la=0.01, la_mu=0.01, R_eps_weight=1e-6, 0.2 / 2000).
struct BarlowTwinsConfig {
  double lambda = 0.0051;
  double eps = 1e-5;  // added to the column std during standardization
};

struct VicregConfig {
  double w_inv = 25.0;
  double w_var = 25.0;
  double w_cov = 1.0;
  double gamma = 1.0;
  double eps = 1e-4;
};

// Which estimate the CorInfoMax forgetting factors weight.
//   FreshWeight:   R <- (1 - la) R_old + la R_batch
//   HistoryWeight: R <- la R_old + (1 - la) R_batch
enum class EmaOrientation { FreshWeight, HistoryWeight };

struct CorInfoMaxConfig {
  double w_inv = 2000.0;
  double w_cov = 0.2;
  double r_ini = 1.0;
  double la_r = 0.01;
  double la_mu = 0.01;
  double r_eps_weight = 1e-6;
  EmaOrientation orientation = EmaOrientation::FreshWeight;
};

struct CorInfoMaxState {
  Matrix r_a, r_b;    // d x d running covariance estimates
  Matrix mu_a, mu_b;  // 1 x d running means
  std::uint64_t step = 0;

  static CorInfoMaxState initial(std::size_t dim, double r_ini);
  std::size_t dim() const { return r_a.rows(); }
};

// sum_i (1 - C_ii)^2 + lambda * sum_{i != j} C_ij^2 on the cross-correlation
// of the column-standardized views.
LossOutput barlow_twins_loss(const Matrix& za, const Matrix& zb, double lambda, double eps);
inline LossOutput barlow_twins_loss(const Matrix& za, const Matrix& zb,
                                    const BarlowTwinsConfig& cfg = {}) {
  return barlow_twins_loss(za, zb, cfg.lambda, cfg.eps);
}

LossOutput vicreg_loss(const Matrix& za, const Matrix& zb, const VicregConfig& cfg = {});

// Updates the running statistics with the current batch and returns the
// loss on the updated estimates along with the new state. Gradients are
// taken with the prior state held fixed.
std::pair<LossOutput, CorInfoMaxState> corinfomax_loss(const Matrix& za, const Matrix& zb,
                                                       const CorInfoMaxState& state,
                                                       const CorInfoMaxConfig& cfg = {});

// Mean over rows of ||p/|p| - t/|t|||^2. grad_b is always zero: the target
// side is a stop-gradient branch.
LossOutput byol_loss(const Matrix& predictions, const Matrix& targets);

enum class ObjectiveKind { BarlowTwins, Vicreg, CorInfoMax, Byol };

std::string_view to_string(ObjectiveKind kind);
ObjectiveKind parse_objective(std::string_view name);

struct ObjectiveConfig {
  ObjectiveKind kind = ObjectiveKind::BarlowTwins;
  BarlowTwinsConfig barlow;
  VicregConfig vicreg;
  CorInfoMaxConfig corinfomax;
  bool byol_symmetric = false;
};

// Stateful front end over the four losses; owns the CorInfoMax running
// statistics. Not reentrant: one caller at a time.
class Objective {
 public:
  Objective(ObjectiveConfig cfg, std::size_t dim);

  LossOutput evaluate(const Matrix& za, const Matrix& zb);

  const ObjectiveConfig& config() const { return cfg_; }
  const std::optional<CorInfoMaxState>& state() const { return state_; }
  void set_state(CorInfoMaxState state);

 private:
  ObjectiveConfig cfg_;
  std::optional<CorInfoMaxState> state_;
};

}  // namespace unsee
