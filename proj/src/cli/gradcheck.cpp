#include "unsee/cli/gradcheck.hpp"

#include <algorithm>
#include <functional>

#include "unsee/architectures/model.hpp"
#include "unsee/error.hpp"
#include "unsee/numerics/stats.hpp"
#include "unsee/objectives/objectives.hpp"
#include "unsee/rng.hpp"

namespace unsee {

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, RngStream& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = scale * rng.normal();
  return m;
}

double inner(const Matrix& a, const Matrix& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.values().size(); ++i) s += a.values()[i] * b.values()[i];
  return s;
}

Matrix perturbed(Matrix g, double delta) {
  if (delta != 0.0)
    for (double& v : g.values()) v += delta;
  return g;
}

struct Instance {
  std::size_t batch, dim;
  std::uint64_t index;
  RngStream rng;
};

class Runner {
 public:
  explicit Runner(const GradcheckOptions& opts) : opts_(opts) {}

  void check(Instance& in, const std::string& target, const std::string& tensor,
             const Matrix& analytic, const MatrixFunction& f, const Matrix& x) {
    pending_.push_back({GradcheckCase{target, tensor, in.batch, in.dim, in.index, 0.0},
                        perturbed(analytic, opts_.perturb), finite_diff_grad(f, x, kGradcheckStep)});
  }

  // Errors are normalized by the largest gradient entry of the whole
  // instance, so a tensor whose exact gradient is zero (a bias feeding
  // batch-norm) is judged against the instance scale, not its own rounding noise.
  void finish_instance() {
    double scale = 0.0;
    for (const auto& p : pending_) scale = std::max({scale, max_abs(p.analytic), max_abs(p.numeric)});
    for (auto& p : pending_) {
      p.c.rel_error = gradient_relative_error(p.analytic, p.numeric, std::max(scale, 1e-7));
      report_.cases.push_back(std::move(p.c));
    }
    pending_.clear();
  }

  GradcheckReport take() { return std::move(report_); }
  const GradcheckOptions& opts() const { return opts_; }

 private:
  struct Pending {
    GradcheckCase c;
    Matrix analytic, numeric;
  };
  const GradcheckOptions& opts_;
  std::vector<Pending> pending_;
  GradcheckReport report_;
};

void check_pair_loss(Runner& run, Instance& in, const std::string& name,
                     const std::function<LossOutput(const Matrix&, const Matrix&)>& loss,
                     bool check_b) {
  const Matrix za = random_matrix(in.batch, in.dim, in.rng);
  const Matrix zb = random_matrix(in.batch, in.dim, in.rng);
  const LossOutput out = loss(za, zb);
  run.check(in, name, "z_a", out.grad_a, [&](const Matrix& x) { return loss(x, zb).loss; }, za);
  if (check_b)
    run.check(in, name, "z_b", out.grad_b, [&](const Matrix& x) { return loss(za, x).loss; }, zb);
}

CorInfoMaxState warm_state(std::size_t dim, RngStream& rng) {
  CorInfoMaxState s = CorInfoMaxState::initial(dim, 1.0);
  // A few updates so R is not a multiple of the identity.
  for (int k = 0; k < 3; ++k) {
    const Matrix a = random_matrix(6, dim, rng);
    const Matrix b = random_matrix(6, dim, rng);
    CorInfoMaxConfig cfg;
    cfg.la_r = 0.3;
    s = corinfomax_loss(a, b, s, cfg).second;
  }
  return s;
}

// Small encoder over a toy vocabulary with uneven sentence lengths.
TokenBatch toy_batch(std::size_t rows, std::size_t vocab, std::size_t max_len, RngStream& rng) {
  std::vector<TokenRow> out;
  for (std::size_t r = 0; r < rows; ++r) {
    TokenRow row;
    row.ids.assign(max_len, Vocab::kPad);
    row.mask.assign(max_len, 0);
    const std::size_t len = 1 + rng.uniform_index(max_len);
    for (std::size_t t = 0; t < len; ++t) {
      row.ids[t] = static_cast<TokenId>(Vocab::kUnk + rng.uniform_index(vocab - 1));
      row.mask[t] = 1;
    }
    out.push_back(std::move(row));
  }
  return make_batch(out);
}

EncoderParams toy_encoder(std::size_t dim, bool feedforward, double dropout, RngStream& rng) {
  EncoderInit init;
  init.vocab_size = 7;
  init.dim = dim;
  init.feedforward = feedforward;
  init.dropout = dropout;
  init.max_len = 5;
  return init_encoder(init, rng);
}

void check_encoder(Runner& run, Instance& in) {
  const bool ff = in.index % 4 != 3;  // mostly with the feed-forward, sometimes without
  EncoderParams params = toy_encoder(in.dim, ff, 0.2, in.rng);
  const TokenBatch batch = toy_batch(in.batch, params.vocab_size(), params.max_len, in.rng);
  const Matrix g = random_matrix(in.batch, in.dim, in.rng);
  const std::uint64_t mask_seed = in.rng.next_u64();

  auto forward = [&](const EncoderParams& p) {
    RngStream masks(mask_seed);
    return encode_batch(p, batch, Mode::Train, masks);
  };
  const Encoded enc = forward(params);
  const EncoderGrads grads = encoder_backward(params, enc.context, g);

  auto with = [&](Matrix EncoderParams::*member) {
    return [&, member](const Matrix& x) {
      EncoderParams p = params;
      p.*member = x;
      return inner(forward(p).pooled, g);
    };
  };
  run.check(in, "encoder", "embedding", grads.embedding, with(&EncoderParams::embedding),
            params.embedding);
  if (ff) {
    run.check(in, "encoder", "ff_weight", grads.ff_weight, with(&EncoderParams::ff_weight),
              params.ff_weight);
    run.check(in, "encoder", "ff_bias", grads.ff_bias, with(&EncoderParams::ff_bias),
              params.ff_bias);
  }
}

void check_projector(Runner& run, Instance& in) {
  const std::size_t depth = 1 + in.index % 4;
  ProjectorShape shape{in.dim, in.dim + 1, in.dim, depth};
  ProjectorParams proj = init_projector(shape, in.rng);
  const Matrix z = random_matrix(in.batch, in.dim, in.rng);
  const Matrix g = random_matrix(in.batch, in.dim, in.rng);
  const MlpResult res = mlp_forward(proj, z, Mode::Train);
  const MlpBackward back = mlp_backward(proj, res.context, g);

  auto value = [&](const ProjectorParams& p, const Matrix& input) {
    return inner(mlp_forward(p, input, Mode::Train).output, g);
  };
  run.check(in, "projector", "input", back.grad_input,
            [&](const Matrix& x) { return value(proj, x); }, z);
  for (std::size_t l = 0; l < proj.depth(); ++l) {
    auto with = [&, l](Matrix ProjectorLayer::*member) {
      return [&, l, member](const Matrix& x) {
        ProjectorParams p = proj;
        p.layers[l].*member = x;
        return value(p, z);
      };
    };
    const std::string prefix = "layer" + std::to_string(l) + ".";
    const auto& lg = back.grads.layers[l];
    run.check(in, "projector", prefix + "weight", lg.weight, with(&ProjectorLayer::weight),
              proj.layers[l].weight);
    run.check(in, "projector", prefix + "bias", lg.bias, with(&ProjectorLayer::bias),
              proj.layers[l].bias);
    if (proj.layers[l].norm_act) {
      run.check(in, "projector", prefix + "bn_scale", lg.bn_scale, with(&ProjectorLayer::bn_scale),
                proj.layers[l].bn_scale);
      run.check(in, "projector", prefix + "bn_shift", lg.bn_shift, with(&ProjectorLayer::bn_shift),
                proj.layers[l].bn_shift);
    }
  }
}

// End to end: every trainable tensor of a small model through a loss.
void check_model(Runner& run, Instance& in) {
  static constexpr Variant kVariants[] = {Variant::Projection, Variant::OnlineProjection,
                                          Variant::SingleProjection};
  const Variant variant = kVariants[in.index % 3];
  EncoderParams enc = toy_encoder(in.dim, true, 0.1, in.rng);
  ProjectorParams proj = init_projector({in.dim, in.dim, in.dim, 2}, in.rng);
  Model model = make_model(variant, enc, proj, 0.9);
  if (model.target) {
    // Pull the target away from the online copy so the two branches differ.
    for (double& v : model.target->params.embedding.values()) v += 0.3 * in.rng.normal();
  }
  const TokenBatch batch = toy_batch(in.batch, enc.vocab_size(), enc.max_len, in.rng);
  const std::uint64_t seed_a = in.rng.next_u64();
  const std::uint64_t seed_b = in.rng.next_u64();

  auto loss_of = [&](const Model& m, ModelGrads* grads) {
    RngStream da(seed_a), db(seed_b);
    const PairForward fwd = forward_pair(m, batch, Mode::Train, da, db);
    const LossOutput out = vicreg_loss(fwd.view_a, fwd.view_b);
    if (grads) *grads = backward_pair(m, fwd, out.grad_a, out.grad_b);
    return out.loss;
  };
  ModelGrads grads;
  loss_of(model, &grads);
  const auto grad_list = parameter_gradients(grads);
  auto params = trainable_parameters(model);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix original = *params[i].value;
    Matrix* slot = params[i].value;
    auto f = [&](const Matrix& x) {
      *slot = x;
      const double v = loss_of(model, nullptr);
      *slot = original;
      return v;
    };
    run.check(in, "model/" + std::string(to_string(variant)), params[i].name,
              *grad_list[i].value, f, original);
  }
}

}  // namespace

bool GradcheckReport::passed() const {
  return !cases.empty() &&
         std::all_of(cases.begin(), cases.end(), [](const GradcheckCase& c) { return c.passed(); });
}

std::vector<GradcheckCase> GradcheckReport::worst_per_target() const {
  std::vector<GradcheckCase> out;
  for (const auto& c : cases) {
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const GradcheckCase& w) { return w.target == c.target; });
    if (it == out.end())
      out.push_back(c);
    else if (c.rel_error > it->rel_error)
      *it = c;
  }
  return out;
}

GradcheckReport run_gradcheck(const GradcheckOptions& opts) {
  require(!opts.batch_sizes.empty() && !opts.dims.empty(), ErrorKind::InvalidArgument,
          "gradcheck needs at least one batch size and one dim");
  for (auto b : opts.batch_sizes)
    require(b >= 3 && b <= 8, ErrorKind::OutOfRange, "gradcheck batch sizes must be in [3, 8]");
  for (auto d : opts.dims)
    require(d >= 2 && d <= 8, ErrorKind::OutOfRange, "gradcheck dims must be in [2, 8]");

  Runner run(opts);
  const std::size_t grid = opts.batch_sizes.size() * opts.dims.size();
  using Check = std::function<void(Instance&)>;
  const std::vector<std::pair<std::string, Check>> targets = {
      {"barlow_twins",
       [&](Instance& in) {
         check_pair_loss(run, in, "barlow_twins",
                         [](const Matrix& a, const Matrix& b) { return barlow_twins_loss(a, b); },
                         true);
       }},
      {"vicreg",
       [&](Instance& in) {
         check_pair_loss(run, in, "vicreg",
                         [](const Matrix& a, const Matrix& b) { return vicreg_loss(a, b); }, true);
       }},
      {"corinfomax",
       [&](Instance& in) {
         const CorInfoMaxState state = warm_state(in.dim, in.rng);
         check_pair_loss(
             run, in, "corinfomax",
             [&](const Matrix& a, const Matrix& b) { return corinfomax_loss(a, b, state).first; },
             true);
       }},
      {"byol",
       [&](Instance& in) {
         // Only the prediction side: the target branch is a stop-gradient.
         check_pair_loss(run, in, "byol",
                         [](const Matrix& a, const Matrix& b) { return byol_loss(a, b); }, false);
       }},
      {"encoder", [&](Instance& in) { check_encoder(run, in); }},
      {"projector", [&](Instance& in) { check_projector(run, in); }},
      {"model", [&](Instance& in) { check_model(run, in); }},
  };

  for (const auto& [name, fn] : targets) {
    for (std::uint64_t i = 0; i < opts.instances; ++i) {
      const std::size_t cell = i % grid;
      Instance in{opts.batch_sizes[cell / opts.dims.size()], opts.dims[cell % opts.dims.size()], i,
                  RngStream(opts.seed, "gradcheck/" + name + "/" + std::to_string(i))};
      fn(in);
      run.finish_instance();
    }
  }
  return run.take();
}

}  // namespace unsee
