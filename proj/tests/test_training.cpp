#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <cstring>
#include <limits>

#include "unsee/cli/synthetic.hpp"
#include "unsee/evaluation/sts.hpp"
#include "unsee/training/adam.hpp"
#include "unsee/training/checkpoint.hpp"
#include "unsee/training/trainer.hpp"

using namespace unsee;
using unsee::test::kind_of;
using unsee::test::TempDir;

namespace {

const SyntheticCorpus& small_corpus() {
  static const SyntheticCorpus c = [] {
    SyntheticSpec spec;
    spec.seed = 5;
    spec.n_sentences = 96;
    spec.n_topics = 4;
    return generate_corpus(spec);
  }();
  return c;
}

TrainConfig small_config(Variant v, ObjectiveKind k) {
  TrainConfig cfg;
  cfg.variant = v;
  cfg.objective.kind = k;
  cfg.batch_size = 8;
  cfg.embed_dim = 6;
  cfg.epochs = 2;
  cfg.eval_count = 4;
  cfg.learning_rate = 1e-3;
  cfg.seed = 11;
  return cfg;
}

TrainInputs inputs_for(const SyntheticCorpus& c) {
  return {c.sentences, std::span<const LabeledPair>(c.dev.data(), 50), std::nullopt, std::nullopt};
}

bool bitwise_equal(double a, double b) {
  return std::memcmp(&a, &b, sizeof a) == 0;
}

void check_same_model(const Model& a, const Model& b) {
  CHECK(a.variant == b.variant);
  CHECK(a.encoder.embedding == b.encoder.embedding);
  CHECK(a.encoder.ff_weight == b.encoder.ff_weight);
  CHECK(a.encoder.ff_bias == b.encoder.ff_bias);
  REQUIRE(a.projector.depth() == b.projector.depth());
  for (std::size_t l = 0; l < a.projector.depth(); ++l) {
    const auto& x = a.projector.layers[l];
    const auto& y = b.projector.layers[l];
    CHECK(x.weight == y.weight);
    CHECK(x.bias == y.bias);
    CHECK(x.bn_scale == y.bn_scale);
    CHECK(x.bn_shift == y.bn_shift);
    CHECK(x.running_mean == y.running_mean);
    CHECK(x.running_var == y.running_var);
  }
  REQUIRE(a.target.has_value() == b.target.has_value());
  if (a.target) {
    CHECK(a.target->params.embedding == b.target->params.embedding);
    CHECK(a.target->decay == b.target->decay);
  }
}

}  // namespace

TEST_CASE("adam_step") {
  Matrix w{{1.5, -2.0}};
  Matrix g(1, 2);
  std::vector<NamedTensor> params{{"w", &w}};
  std::vector<NamedConstTensor> grads{{"w", &g}};
  AdamState state = AdamState::for_parameters(params);
  CHECK(state.config.beta1 == 0.9);
  CHECK(state.config.beta2 == 0.999);
  CHECK(state.config.eps == 1e-8);

  SUBCASE("zero gradient leaves parameters and moments alone") {
    adam_step(params, grads, state, 0.1);
    CHECK(w == Matrix{{1.5, -2.0}});
    CHECK(state.first[0] == Matrix(1, 2));
    CHECK(state.second[0] == Matrix(1, 2));
    CHECK(state.step == 1);
  }
  SUBCASE("first step moves about lr against the gradient") {
    Matrix x{{0.0}};
    Matrix gx{{1.0}};
    std::vector<NamedTensor> p{{"x", &x}};
    std::vector<NamedConstTensor> q{{"x", &gx}};
    AdamState s = AdamState::for_parameters(p);
    adam_step(p, q, s, 0.1);
    // m_hat = 1, v_hat = 1, so the step is lr / (1 + eps).
    CHECK(x(0, 0) == doctest::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-14));
    gx(0, 0) = -3.0;
    adam_step(p, q, s, 0.1);
    const double m = (0.9 * 0.1 * 1.0 + 0.1 * -3.0) / (1 - 0.81);
    const double v = (0.999 * 0.001 * 1.0 + 0.001 * 9.0) / (1 - 0.999 * 0.999);
    CHECK(x(0, 0) == doctest::Approx(-0.1 / (1.0 + 1e-8) - 0.1 * m / (std::sqrt(v) + 1e-8)).epsilon(1e-12));
  }
  SUBCASE("non-finite gradient names the tensor and changes nothing") {
    Matrix b{{1.0}};
    Matrix gb(1, 1);
    gb(0, 0) = std::numeric_limits<double>::quiet_NaN();
    g(0, 0) = 1.0;
    std::vector<NamedTensor> p{{"w", &w}, {"head.bias", &b}};
    std::vector<NamedConstTensor> q{{"w", &g}, {"head.bias", &gb}};
    AdamState s = AdamState::for_parameters(p);
    try {
      adam_step(p, q, s, 0.1);
      FAIL("expected NonFinite");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::NonFinite);
      CHECK(std::string(e.what()).find("head.bias") != std::string::npos);
    }
    CHECK(w == Matrix{{1.5, -2.0}});
    CHECK(s.step == 0);
  }
  SUBCASE("shape mismatch") {
    Matrix bad(2, 2);
    std::vector<NamedConstTensor> q{{"w", &bad}};
    CHECK(kind_of([&] { adam_step(params, q, state, 0.1); }) == ErrorKind::ShapeMismatch);
  }
  SUBCASE("lr must be positive") {
    CHECK(kind_of([&] { adam_step(params, grads, state, 0.0); }) == ErrorKind::InvalidArgument);
  }
}

TEST_CASE("evaluation_steps") {
  CHECK(evaluation_steps(100, 20).size() == 20);
  CHECK(evaluation_steps(100, 20).front() == 5);
  CHECK(evaluation_steps(100, 20).back() == 100);
  CHECK(evaluation_steps(7, 3) == std::vector<std::size_t>{2, 4, 7});
  CHECK(evaluation_steps(3, 5) == std::vector<std::size_t>{0, 1, 2, 3});
}

TEST_CASE("train configuration") {
  TrainConfig cfg;
  CHECK(cfg.batch_size == 32);
  CHECK(cfg.learning_rate == 1e-4);
  CHECK(cfg.max_len == 64);
  CHECK(cfg.eval_count == 20);
  CHECK(cfg.decay == 0.999);
  cfg.epochs = 1;
  CHECK_NOTHROW(validate(cfg));
  for (auto [kind, depth] : {std::pair{ObjectiveKind::BarlowTwins, 4}, std::pair{ObjectiveKind::CorInfoMax, 4},
                             std::pair{ObjectiveKind::Vicreg, 3}, std::pair{ObjectiveKind::Byol, 3}}) {
    cfg.objective.kind = kind;
    CHECK(resolved_mlp_depth(cfg) == static_cast<std::size_t>(depth));
  }
  auto broken = [](auto mutate) {
    TrainConfig c;
    c.epochs = 1;
    mutate(c);
    return kind_of([&] { validate(c); });
  };
  CHECK(broken([](TrainConfig& c) { c.batch_size = 1; }) == ErrorKind::Config);
  CHECK(broken([](TrainConfig& c) { c.eval_count = 0; }) == ErrorKind::Config);
  CHECK(broken([](TrainConfig& c) { c.learning_rate = 0.0; }) == ErrorKind::Config);
  CHECK(broken([](TrainConfig& c) { c.epochs = 0; }) == ErrorKind::Config);
  CHECK(broken([](TrainConfig& c) { c.decay = 1.5; }) == ErrorKind::Config);
}

TEST_CASE("train is deterministic") {
  const auto& c = small_corpus();
  for (auto v : {Variant::Projection, Variant::SingleProjection}) {
    const TrainConfig cfg = small_config(v, ObjectiveKind::Vicreg);
    const TrainReport a = train(cfg, inputs_for(c));
    const TrainReport b = train(cfg, inputs_for(c));
    CHECK(a.total_steps == 24);
    REQUIRE(a.rows.size() == 4);
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
      CHECK(a.rows[i].step == b.rows[i].step);
      CHECK(bitwise_equal(a.rows[i].loss, b.rows[i].loss));
      CHECK(bitwise_equal(a.rows[i].spearman, b.rows[i].spearman));
      CHECK(bitwise_equal(a.rows[i].effective_rank, b.rows[i].effective_rank));
    }
    CHECK(metrics_csv(a.rows) == metrics_csv(b.rows));
    check_same_model(a.final_model, b.final_model);
  }
}

TEST_CASE("report invariants") {
  const auto& c = small_corpus();
  for (auto k : {ObjectiveKind::BarlowTwins, ObjectiveKind::Vicreg, ObjectiveKind::CorInfoMax,
                 ObjectiveKind::Byol}) {
    const TrainReport r = train(small_config(Variant::SingleProjection, k), inputs_for(c));
    REQUIRE(!r.aborted);
    double best = -2.0;
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
      CHECK(std::isfinite(r.rows[i].loss));
      if (i > 0) CHECK(r.rows[i - 1].step < r.rows[i].step);
      best = std::max(best, r.rows[i].spearman);
    }
    CHECK(r.best_spearman == best);
  }
}

TEST_CASE("EMA runs after the optimizer step") {
  std::vector<std::pair<TraceEvent, std::size_t>> trace;
  TrainHooks hooks;
  hooks.trace = [&](TraceEvent e, std::size_t s) { trace.emplace_back(e, s); };
  TrainConfig cfg = small_config(Variant::SingleProjection, ObjectiveKind::BarlowTwins);
  cfg.epochs = 1;
  train(cfg, inputs_for(small_corpus()), hooks);
  std::size_t ema = 0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (trace[i].first != TraceEvent::EmaUpdate) continue;
    ++ema;
    REQUIRE(i > 0);
    CHECK(trace[i - 1].first == TraceEvent::AdamStep);
    CHECK(trace[i - 1].second == trace[i].second);
  }
  CHECK(ema == 12);

  trace.clear();
  cfg.variant = Variant::Projection;
  train(cfg, inputs_for(small_corpus()), hooks);
  CHECK(std::none_of(trace.begin(), trace.end(),
                     [](const auto& t) { return t.first == TraceEvent::EmaUpdate; }));
}

TEST_CASE("target encoder only moves through EMA") {
  TrainConfig cfg = small_config(Variant::OnlineProjection, ObjectiveKind::Vicreg);
  cfg.epochs = 1;
  TrainHooks hooks;
  hooks.skip_ema = true;
  const TrainReport r = train(cfg, inputs_for(small_corpus()), hooks);
  const Model init = init_model(cfg, r.vocab.size());
  REQUIRE(r.final_model.target.has_value());
  CHECK(r.final_model.target->params.embedding == init.target->params.embedding);
  CHECK(r.final_model.target->params.ff_weight == init.target->params.ff_weight);
  CHECK(r.final_model.encoder.embedding != init.encoder.embedding);
}

TEST_CASE("train errors") {
  const auto& c = small_corpus();
  TrainConfig cfg = small_config(Variant::Projection, ObjectiveKind::BarlowTwins);
  cfg.batch_size = 200;
  CHECK(kind_of([&] { train(cfg, inputs_for(c)); }) == ErrorKind::InvalidArgument);
  cfg.batch_size = 8;
  CHECK(kind_of([&] { train(cfg, {c.sentences, {}, std::nullopt, std::nullopt}); }) ==
        ErrorKind::EmptyInput);
}

TEST_CASE("non-finite loss aborts with a diagnostics row") {
  TrainConfig cfg = small_config(Variant::Projection, ObjectiveKind::Vicreg);
  cfg.learning_rate = 1e300;
  const TrainReport r = train(cfg, inputs_for(small_corpus()));
  REQUIRE(r.aborted);
  CHECK(r.abort_step >= 1);
  CHECK(r.rows.back().step == r.abort_step);
  CHECK(std::isnan(r.rows.back().loss));
  CHECK(!r.abort_reason.empty());
}

TEST_CASE("metrics csv") {
  MetricsRow row;
  row.step = 3;
  row.loss = 1.25;
  row.loss_inv = 0.5;
  row.spearman = 0.75;
  row.effective_rank = 4;
  row.mean_dim_std = 0.125;
  const std::vector<MetricsRow> rows{row};
  CHECK(metrics_csv(rows) ==
        "step,loss,loss_inv,loss_var,loss_cov,spearman,effective_rank,mean_dim_std\n"
        "3,1.25,0.5,,,0.75,4,0.125\n");
  TempDir dir("metrics");
  write_metrics_csv(dir / "m.csv", rows);
  std::ifstream in(dir / "m.csv", std::ios::binary);
  const std::string text((std::istreambuf_iterator<char>(in)), {});
  CHECK(text == metrics_csv(rows));
}

TEST_CASE("checkpoints") {
  TempDir dir("ckpt");
  const auto& c = small_corpus();
  TrainConfig cfg = small_config(Variant::SingleProjection, ObjectiveKind::CorInfoMax);
  TrainInputs in = inputs_for(c);
  in.out_dir = dir.path();
  const TrainReport r = train(cfg, in);
  REQUIRE(r.checkpoint_path.has_value());
  const auto path = *r.checkpoint_path;

  SUBCASE("round trip of the final model is bitwise") {
    Checkpoint ck{r.final_model, CorInfoMaxState{}, r.vocab.hash(), "vocab.txt", {{"k", "v w"}}};
    ck.objective_state->r_a = Matrix{{1.0, 0.25}, {0.25, 2.0}};
    ck.objective_state->r_b = Matrix{{3.0, 0.0}, {0.0, 1.0 / 3.0}};
    ck.objective_state->mu_a = Matrix{{-0.0, 1e-300}};
    ck.objective_state->mu_b = Matrix{{5.0, 6.0}};
    save_checkpoint(ck, dir / "final.ckpt");
    const Checkpoint back = load_checkpoint(dir / "final.ckpt", r.final_model);
    check_same_model(back.model, r.final_model);
    CHECK(back.vocab_hash == r.vocab.hash());
    CHECK(back.vocab_file == "vocab.txt");
    CHECK(back.extra.at("k") == "v w");
    REQUIRE(back.objective_state.has_value());
    CHECK(back.objective_state->r_a == ck.objective_state->r_a);
    CHECK(std::signbit(back.objective_state->mu_a(0, 0)));
    CHECK(back.objective_state->mu_a(0, 1) == 1e-300);
  }
  SUBCASE("best checkpoint reproduces best_spearman") {
    const Checkpoint back = load_checkpoint(path);
    const EvalResult e = sts_eval(back.model, in.dev, r.vocab, cfg.seed);
    CHECK(std::abs(e.spearman - r.best_spearman) <= 1e-12);
    CHECK(back.extra.at("step") == std::to_string(r.best_step));
  }
  SUBCASE("truncated file") {
    std::filesystem::copy_file(path, dir / "cut.ckpt");
    std::filesystem::resize_file(dir / "cut.ckpt", std::filesystem::file_size(path) - 9);
    CHECK(kind_of([&] { load_checkpoint(dir / "cut.ckpt"); }) == ErrorKind::Truncated);
  }
  SUBCASE("bad magic") {
    std::ofstream(dir / "bad.ckpt") << "NOTACKPT\nmeta x y\n\n";
    CHECK(kind_of([&] { load_checkpoint(dir / "bad.ckpt"); }) == ErrorKind::BadMagic);
    std::ofstream(dir / "empty.ckpt");
    CHECK(kind_of([&] { load_checkpoint(dir / "empty.ckpt"); }) == ErrorKind::BadMagic);
  }
  SUBCASE("depth mismatch") {
    TrainConfig deeper = cfg;
    deeper.mlp_depth = 3;
    const Model expected = init_model(deeper, r.vocab.size());
    CHECK(kind_of([&] { load_checkpoint(path, expected); }) == ErrorKind::CheckpointMismatch);
    TrainConfig other_variant = cfg;
    other_variant.variant = Variant::Projection;
    CHECK(kind_of([&] { load_checkpoint(path, init_model(other_variant, r.vocab.size())); }) ==
          ErrorKind::CheckpointMismatch);
  }
  SUBCASE("missing file") {
    CHECK(kind_of([&] { load_checkpoint(dir / "nope.ckpt"); }) == ErrorKind::Io);
  }
}
