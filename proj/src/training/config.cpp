#include "unsee/training/config.hpp"

#include "unsee/error.hpp"

namespace unsee {

std::size_t default_mlp_depth(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::Byol:
    case ObjectiveKind::Vicreg: return 3;
    case ObjectiveKind::BarlowTwins:
    case ObjectiveKind::CorInfoMax: return 4;
  }
  return 3;
}

std::size_t resolved_mlp_depth(const TrainConfig& cfg) {
  return cfg.mlp_depth == 0 ? default_mlp_depth(cfg.objective.kind) : cfg.mlp_depth;
}

std::size_t resolved_projector_hidden(const TrainConfig& cfg) {
  return cfg.projector_hidden == 0 ? cfg.embed_dim : cfg.projector_hidden;
}

std::size_t resolved_projector_out(const TrainConfig& cfg) {
  return cfg.projector_out == 0 ? cfg.embed_dim : cfg.projector_out;
}

void validate(const TrainConfig& cfg) {
  auto check = [](bool ok, const char* key, const std::string& why) {
    require(ok, ErrorKind::Config, std::string(key) + ": " + why);
  };
  check(cfg.batch_size >= 2, "batch_size", "must be >= 2");
  check(cfg.eval_count >= 1, "eval_count", "must be >= 1");
  check(cfg.learning_rate > 0.0, "learning_rate", "must be > 0");
  check(cfg.epochs >= 1, "epochs", "must be >= 1");
  check(cfg.max_len >= 1, "max_len", "must be >= 1");
  check(cfg.decay >= 0.0 && cfg.decay < 1.0, "decay", "must lie in [0, 1)");
  const std::size_t depth = resolved_mlp_depth(cfg);
  check(depth >= 1 && depth <= 4, "mlp_depth", "must be in 1..4");
  check(cfg.embed_dim >= 2, "embed_dim", "must be >= 2");
  check(cfg.dropout >= 0.0 && cfg.dropout < 1.0, "dropout", "must lie in [0, 1)");
  check(cfg.embedding_scale > 0.0, "embedding_scale", "must be > 0");
  check(cfg.min_count >= 1, "min_count", "must be >= 1");
  check(cfg.bn_momentum >= 0.0 && cfg.bn_momentum <= 1.0, "bn_momentum", "must lie in [0, 1]");
  check(cfg.clip_norm >= 0.0, "clip_norm", "must be >= 0");
  check(cfg.objective.barlow.lambda >= 0.0, "lambda", "must be >= 0");
  check(cfg.objective.corinfomax.la_r >= 0.0 && cfg.objective.corinfomax.la_r <= 1.0,
        "corinfomax_la_r", "must lie in [0, 1]");
  check(cfg.objective.corinfomax.la_mu >= 0.0 && cfg.objective.corinfomax.la_mu <= 1.0,
        "corinfomax_la_mu", "must lie in [0, 1]");
  check(cfg.objective.corinfomax.r_ini > 0.0, "corinfomax_r_ini", "must be > 0");
  if (cfg.variant == Variant::SingleProjection)
    check(resolved_projector_out(cfg) == cfg.embed_dim, "projector_out",
          "single_projection needs projector_out == embed_dim");
}

}  // namespace unsee
