#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "unsee/architectures/model.hpp"
#include "unsee/objectives/objectives.hpp"
#include "unsee/training/adam.hpp"

namespace unsee {

// Defaults are the best-run hyperparameters (batch 32, lr 1e-4, sequence
// length 64, EMA decay 0.999, 20 evaluations per run). Development runs used
// batch 64, lr 3e-5, sequence length 32.
struct TrainConfig {
  Variant variant = Variant::SingleProjection;
  ObjectiveConfig objective;
  std::size_t batch_size = 32;
  double learning_rate = 1e-4;
  std::size_t max_len = 64;
  std::size_t epochs = 0;  // required, no default
  double decay = 0.999;
  std::size_t mlp_depth = 0;  // 0: 3 for byol/vicreg, 4 for barlow_twins/corinfomax
  std::size_t eval_count = 20;
  std::uint64_t seed = 0;

  // encoder
  std::size_t embed_dim = 32;
  double dropout = 0.1;
  bool feedforward = true;
  double embedding_scale = 1.0;
  std::size_t min_count = 1;

  // projector; 0 means "same as embed_dim"
  std::size_t projector_hidden = 0;
  std::size_t projector_out = 0;
  double bn_momentum = 0.1;

  AdamConfig adam;
  double clip_norm = 0.0;  // 0 disables global-norm clipping
};

std::size_t default_mlp_depth(ObjectiveKind kind);
std::size_t resolved_mlp_depth(const TrainConfig& cfg);
std::size_t resolved_projector_hidden(const TrainConfig& cfg);
std::size_t resolved_projector_out(const TrainConfig& cfg);

// Throws Config naming the offending field.
void validate(const TrainConfig& cfg);

}  // namespace unsee
