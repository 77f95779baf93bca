#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "unsee/architectures/model.hpp"

namespace unsee {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<Matrix> first;   // mirrors the parameter list
  std::vector<Matrix> second;
  std::uint64_t step = 0;

  static AdamState for_parameters(std::span<const NamedTensor> params, AdamConfig config = {});
};

// Bias-corrected Adam, constant learning rate, no weight decay. Parameters
// are visited in list order. Throws NonFinite (naming the tensor) before
// touching anything if a gradient holds NaN/Inf.
void adam_step(std::span<const NamedTensor> params, std::span<const NamedConstTensor> grads,
               AdamState& state, double lr);

void scale_gradients(ModelGrads& grads, double factor);

// Scales all gradients in place so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_global_norm(ModelGrads& grads, double max_norm);

}  // namespace unsee
