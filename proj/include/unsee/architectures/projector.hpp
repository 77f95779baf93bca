#pragma once

#include <cstddef>
#include <vector>

#include "unsee/mode.hpp"
#include "unsee/numerics/matrix.hpp"
#include "unsee/rng.hpp"

namespace unsee {

// One projector layer: affine, then (non-final layers only) batch-norm and ReLU.
struct ProjectorLayer {
  Matrix weight;  // out x in
  Matrix bias;    // 1 x out
  bool norm_act = false;
  Matrix bn_scale, bn_shift;           // 1 x out
  Matrix running_mean, running_var;    // 1 x out

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }
};

struct ProjectorParams {
  std::vector<ProjectorLayer> layers;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;

  std::size_t depth() const { return layers.size(); }
  std::size_t in_dim() const { return layers.front().in_dim(); }
  std::size_t out_dim() const { return layers.back().out_dim(); }
};

struct ProjectorShape {
  std::size_t in_dim = 32;
  std::size_t hidden_dim = 32;
  std::size_t out_dim = 32;
  std::size_t depth = 3;  // 1..4
};

// Weights and biases ~ U(-1/sqrt(in), 1/sqrt(in)); batch-norm scale 1, shift 0,
// running mean 0, running variance 1.
ProjectorParams init_projector(const ProjectorShape& shape, RngStream& rng);
void validate(const ProjectorParams& proj);

struct LayerContext {
  Matrix input;       // B x in
  Matrix normalized;  // x_hat (norm_act layers)
  Matrix activated;   // output of this layer
  std::vector<double> batch_mean, batch_var;  // population statistics
  std::vector<double> inv_std;
};

struct MlpContext {
  Mode mode = Mode::Train;
  std::vector<LayerContext> layers;
};

struct MlpResult {
  Matrix output;
  MlpContext context;
};

// Train mode normalizes with batch statistics and needs B >= 2; eval mode
// uses the running statistics. Does not touch the running statistics; see
// update_running_stats.
MlpResult mlp_forward(const ProjectorParams& proj, const Matrix& z, Mode mode);

struct ProjectorGrads {
  struct Layer {
    Matrix weight, bias, bn_scale, bn_shift;
  };
  std::vector<Layer> layers;

  static ProjectorGrads zeros_like(const ProjectorParams& proj);
  ProjectorGrads& operator+=(const ProjectorGrads& other);
};

struct MlpBackward {
  ProjectorGrads grads;
  Matrix grad_input;
};

MlpBackward mlp_backward(const ProjectorParams& proj, const MlpContext& context,
                         const Matrix& grad_output);

// running <- (1 - momentum) * running + momentum * batch, with the unbiased
// batch variance. Only meaningful for a train-mode context.
void update_running_stats(ProjectorParams& proj, const MlpContext& context);

}  // namespace unsee
