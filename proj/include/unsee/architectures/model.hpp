#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "unsee/architectures/projector.hpp"
#include "unsee/encoder/encoder.hpp"

namespace unsee {

// projection:         both views through the online encoder and the MLP.
// online_projection:  view b through an EMA target encoder, then the shared MLP.
// single_projection:  view b is the raw EMA target embedding, no MLP.
enum class Variant { Projection, OnlineProjection, SingleProjection };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);

struct TargetState {
  EncoderParams params;
  double decay = 0.999;
};

struct Model {
  Variant variant = Variant::Projection;
  EncoderParams encoder;
  ProjectorParams projector;
  std::optional<TargetState> target;
};

// Target, when the variant needs one, starts as an exact copy of `encoder`.
Model make_model(Variant variant, EncoderParams encoder, ProjectorParams projector, double decay);
void validate(const Model& model);

// target <- decay * target + (1 - decay) * online, tensor by tensor.
TargetState ema_update(const EncoderParams& online, TargetState target);
void ema_update_in_place(const EncoderParams& online, TargetState& target);

struct PairForward {
  Matrix view_a;
  Matrix view_b;
  Matrix pooled_a;  // online encoder output for view a
  Matrix pooled_b;  // encoder output for view b (online or target)
  EncoderContext encoder_a;
  std::optional<EncoderContext> encoder_b;  // projection only
  MlpContext mlp_a;
  std::optional<MlpContext> mlp_b;          // projection, online_projection
};

// Two dropout views of `batch`, wired per the model variant. view a draws its
// dropout masks from `dropout_a`, view b from `dropout_b`.
PairForward forward_pair(const Model& model, const TokenBatch& batch, Mode mode,
                         RngStream& dropout_a, RngStream& dropout_b);

struct ModelGrads {
  EncoderGrads encoder;
  ProjectorGrads projector;
};

// Gradients of the online parameters. Anything produced by the target
// encoder is a constant here.
ModelGrads backward_pair(const Model& model, const PairForward& fwd, const Matrix& grad_a,
                         const Matrix& grad_b);

void update_running_stats(Model& model, const PairForward& fwd);

// Online encoder, eval mode, pooled output; the projector is not applied.
Matrix embed_for_eval(const Model& model, const TokenBatch& batch);

// Trainable tensors in a fixed order, paired with their gradients.
struct NamedTensor {
  std::string name;
  Matrix* value;
};
struct NamedConstTensor {
  std::string name;
  const Matrix* value;
};
std::vector<NamedTensor> trainable_parameters(Model& model);
std::vector<NamedConstTensor> parameter_gradients(const ModelGrads& grads);
ModelGrads zero_grads(const Model& model);

}  // namespace unsee
