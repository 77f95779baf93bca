#include "unsee/architectures/model.hpp"

#include <string>

#include "unsee/error.hpp"

namespace unsee {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Projection: return "projection";
    case Variant::OnlineProjection: return "online_projection";
    case Variant::SingleProjection: return "single_projection";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  for (auto v : {Variant::Projection, Variant::OnlineProjection, Variant::SingleProjection})
    if (to_string(v) == name) return v;
  fail(ErrorKind::Config, "unknown variant '" + std::string(name) +
                              "' (expected projection, online_projection or single_projection)");
}

Model make_model(Variant variant, EncoderParams encoder, ProjectorParams projector, double decay) {
  Model m;
  m.variant = variant;
  m.encoder = std::move(encoder);
  m.projector = std::move(projector);
  if (variant != Variant::Projection) m.target = TargetState{m.encoder, decay};
  validate(m);
  return m;
}

namespace {

bool same_shapes(const EncoderParams& a, const EncoderParams& b) {
  return a.embedding.same_shape(b.embedding) && a.feedforward == b.feedforward &&
         a.ff_weight.same_shape(b.ff_weight) && a.ff_bias.same_shape(b.ff_bias);
}

void ema_tensor(const Matrix& online, Matrix& target, double decay) {
  const auto o = online.values();
  auto t = target.values();
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = decay * t[i] + (1.0 - decay) * o[i];
}

}  // namespace

void validate(const Model& m) {
  validate(m.encoder);
  validate(m.projector);
  require(m.projector.in_dim() == m.encoder.dim(), ErrorKind::ShapeMismatch,
          "model: projector input dim " + std::to_string(m.projector.in_dim()) +
              " does not match encoder dim " + std::to_string(m.encoder.dim()));
  const bool wants_target = m.variant != Variant::Projection;
  require(wants_target == m.target.has_value(), ErrorKind::InvalidArgument,
          std::string("model: variant ") + std::string(to_string(m.variant)) +
              (wants_target ? " requires a target encoder" : " must not carry a target encoder"));
  if (m.target) {
    require(same_shapes(m.encoder, m.target->params), ErrorKind::ShapeMismatch,
            "model: target encoder shape differs from the online encoder");
    require(m.target->decay >= 0.0 && m.target->decay < 1.0, ErrorKind::InvalidArgument,
            "model: EMA decay must lie in [0, 1)");
  }
  if (m.variant == Variant::SingleProjection)
    require(m.projector.out_dim() == m.encoder.dim(), ErrorKind::ShapeMismatch,
            "model: single_projection compares MLP output with raw target embeddings, so the "
            "projector output dim must equal the encoder dim");
}

void ema_update_in_place(const EncoderParams& online, TargetState& target) {
  require(same_shapes(online, target.params), ErrorKind::ShapeMismatch,
          "ema_update: online and target encoders differ in shape");
  ema_tensor(online.embedding, target.params.embedding, target.decay);
  ema_tensor(online.ff_weight, target.params.ff_weight, target.decay);
  ema_tensor(online.ff_bias, target.params.ff_bias, target.decay);
}

TargetState ema_update(const EncoderParams& online, TargetState target) {
  ema_update_in_place(online, target);
  return target;
}

PairForward forward_pair(const Model& model, const TokenBatch& batch, Mode mode,
                         RngStream& dropout_a, RngStream& dropout_b) {
  require(mode == Mode::Train, ErrorKind::InvalidArgument,
          "forward_pair is train-only; use embed_for_eval for evaluation");
  PairForward fwd;
  Encoded a = encode_batch(model.encoder, batch, Mode::Train, dropout_a);
  fwd.pooled_a = std::move(a.pooled);
  fwd.encoder_a = std::move(a.context);
  MlpResult ma = mlp_forward(model.projector, fwd.pooled_a, Mode::Train);
  fwd.view_a = std::move(ma.output);
  fwd.mlp_a = std::move(ma.context);

  switch (model.variant) {
    case Variant::Projection: {
      Encoded b = encode_batch(model.encoder, batch, Mode::Train, dropout_b);
      fwd.pooled_b = std::move(b.pooled);
      fwd.encoder_b = std::move(b.context);
      MlpResult mb = mlp_forward(model.projector, fwd.pooled_b, Mode::Train);
      fwd.view_b = std::move(mb.output);
      fwd.mlp_b = std::move(mb.context);
      break;
    }
    case Variant::OnlineProjection: {
      Encoded b = encode_batch(model.target->params, batch, Mode::Train, dropout_b);
      fwd.pooled_b = std::move(b.pooled);
      MlpResult mb = mlp_forward(model.projector, fwd.pooled_b, Mode::Train);
      fwd.view_b = std::move(mb.output);
      fwd.mlp_b = std::move(mb.context);
      break;
    }
    case Variant::SingleProjection: {
      Encoded b = encode_batch(model.target->params, batch, Mode::Train, dropout_b);
      fwd.pooled_b = std::move(b.pooled);
      fwd.view_b = fwd.pooled_b;
      break;
    }
  }
  return fwd;
}

ModelGrads backward_pair(const Model& model, const PairForward& fwd, const Matrix& grad_a,
                         const Matrix& grad_b) {
  ModelGrads g;
  MlpBackward ba = mlp_backward(model.projector, fwd.mlp_a, grad_a);
  g.projector = std::move(ba.grads);
  g.encoder = encoder_backward(model.encoder, fwd.encoder_a, ba.grad_input);

  switch (model.variant) {
    case Variant::Projection: {
      MlpBackward bb = mlp_backward(model.projector, *fwd.mlp_b, grad_b);
      g.projector += bb.grads;
      g.encoder += encoder_backward(model.encoder, *fwd.encoder_b, bb.grad_input);
      break;
    }
    case Variant::OnlineProjection: {
      // The shared MLP learns from both views; the target encoder sits behind
      // a stop-gradient, so bb.grad_input is dropped.
      MlpBackward bb = mlp_backward(model.projector, *fwd.mlp_b, grad_b);
      g.projector += bb.grads;
      break;
    }
    case Variant::SingleProjection:
      break;
  }
  return g;
}

void update_running_stats(Model& model, const PairForward& fwd) {
  update_running_stats(model.projector, fwd.mlp_a);
  if (fwd.mlp_b) update_running_stats(model.projector, *fwd.mlp_b);
}

Matrix embed_for_eval(const Model& model, const TokenBatch& batch) {
  return encode_eval(model.encoder, batch);
}

std::vector<NamedTensor> trainable_parameters(Model& model) {
  std::vector<NamedTensor> out;
  auto add = [&out](std::string name, Matrix& m) {
    if (!m.empty()) out.push_back({std::move(name), &m});
  };
  add("encoder.embedding", model.encoder.embedding);
  add("encoder.ff_weight", model.encoder.ff_weight);
  add("encoder.ff_bias", model.encoder.ff_bias);
  for (std::size_t l = 0; l < model.projector.layers.size(); ++l) {
    auto& layer = model.projector.layers[l];
    const std::string p = "projector." + std::to_string(l) + ".";
    add(p + "weight", layer.weight);
    add(p + "bias", layer.bias);
    add(p + "bn_scale", layer.bn_scale);
    add(p + "bn_shift", layer.bn_shift);
  }
  return out;
}

std::vector<NamedConstTensor> parameter_gradients(const ModelGrads& grads) {
  std::vector<NamedConstTensor> out;
  auto add = [&out](std::string name, const Matrix& m) {
    if (!m.empty()) out.push_back({std::move(name), &m});
  };
  add("encoder.embedding", grads.encoder.embedding);
  add("encoder.ff_weight", grads.encoder.ff_weight);
  add("encoder.ff_bias", grads.encoder.ff_bias);
  for (std::size_t l = 0; l < grads.projector.layers.size(); ++l) {
    const auto& layer = grads.projector.layers[l];
    const std::string p = "projector." + std::to_string(l) + ".";
    add(p + "weight", layer.weight);
    add(p + "bias", layer.bias);
    add(p + "bn_scale", layer.bn_scale);
    add(p + "bn_shift", layer.bn_shift);
  }
  return out;
}

ModelGrads zero_grads(const Model& model) {
  return {EncoderGrads::zeros_like(model.encoder), ProjectorGrads::zeros_like(model.projector)};
}

}  // namespace unsee
