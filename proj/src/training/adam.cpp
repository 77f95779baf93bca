#include "unsee/training/adam.hpp"

#include <cmath>

#include "unsee/error.hpp"

namespace unsee {

AdamState AdamState::for_parameters(std::span<const NamedTensor> params, AdamConfig config) {
  AdamState s;
  s.config = config;
  for (const auto& p : params) {
    s.first.emplace_back(p.value->rows(), p.value->cols());
    s.second.emplace_back(p.value->rows(), p.value->cols());
  }
  return s;
}

void adam_step(std::span<const NamedTensor> params, std::span<const NamedConstTensor> grads,
               AdamState& state, double lr) {
  require(lr > 0.0, ErrorKind::InvalidArgument, "adam_step: learning rate must be > 0");
  require(params.size() == grads.size() && params.size() == state.first.size(),
          ErrorKind::ShapeMismatch, "adam_step: parameter, gradient and state lists differ in length");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require(params[i].name == grads[i].name && params[i].value->same_shape(*grads[i].value) &&
                params[i].value->same_shape(state.first[i]),
            ErrorKind::ShapeMismatch, "adam_step: gradient for '" + params[i].name + "' does not line up");
    require(grads[i].value->all_finite(), ErrorKind::NonFinite,
            "adam_step: non-finite gradient in '" + grads[i].name + "'");
  }

  ++state.step;
  const auto& c = state.config;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].value->values();
    const auto g = grads[i].value->values();
    auto m = state.first[i].values();
    auto v = state.second[i].values();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k];
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k];
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      p[k] -= lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

void scale_gradients(ModelGrads& grads, double factor) {
  grads.encoder.embedding *= factor;
  grads.encoder.ff_weight *= factor;
  grads.encoder.ff_bias *= factor;
  for (auto& l : grads.projector.layers) {
    l.weight *= factor;
    l.bias *= factor;
    l.bn_scale *= factor;
    l.bn_shift *= factor;
  }
}

double clip_global_norm(ModelGrads& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : parameter_gradients(grads))
    for (double v : g.value->values()) sq += v * v;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) scale_gradients(grads, max_norm / norm);
  return norm;
}

}  // namespace unsee
