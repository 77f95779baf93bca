#include "unsee/training/trainer.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include <spdlog/spdlog.h>

#include "unsee/error.hpp"
#include "unsee/format.hpp"
#include "unsee/training/checkpoint.hpp"

namespace unsee {

namespace {

std::string optional_cell(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

void apply_components(MetricsRow& row, const LossOutput& out) {
  row.loss = out.loss;
  row.loss_inv = out.component("invariance");
  row.loss_var = out.component("variance");
  row.loss_cov = out.component("covariance");
}

void emit(const TrainHooks& hooks, TraceEvent e, std::size_t step) {
  if (hooks.trace) hooks.trace(e, step);
}

}  // namespace

std::string metrics_csv(std::span<const MetricsRow> rows) {
  std::string out(kMetricsHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += std::to_string(r.step) + "," + format_double(r.loss) + "," + optional_cell(r.loss_inv) +
           "," + optional_cell(r.loss_var) + "," + optional_cell(r.loss_cov) + "," +
           format_double(r.spearman) + "," + format_double(r.effective_rank) + "," +
           format_double(r.mean_dim_std) + "\n";
  }
  return out;
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRow> rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write metrics file " + path.string());
  out << metrics_csv(rows);
  require(static_cast<bool>(out), ErrorKind::Io, "error writing " + path.string());
}

std::vector<std::size_t> evaluation_steps(std::size_t total, std::size_t eval_count) {
  std::vector<std::size_t> steps;
  for (std::size_t i = 1; i <= eval_count; ++i) {
    const std::size_t s = i * total / eval_count;
    if (steps.empty() || steps.back() != s) steps.push_back(s);
  }
  return steps;
}

Model init_model(const TrainConfig& cfg, std::size_t vocab_size) {
  RngStream rng(cfg.seed, "init");
  EncoderInit enc;
  enc.vocab_size = vocab_size;
  enc.dim = cfg.embed_dim;
  enc.feedforward = cfg.feedforward;
  enc.dropout = cfg.dropout;
  enc.max_len = cfg.max_len;
  enc.embedding_scale = cfg.embedding_scale;
  EncoderParams encoder = init_encoder(enc, rng);

  ProjectorShape shape{cfg.embed_dim, resolved_projector_hidden(cfg), resolved_projector_out(cfg),
                       resolved_mlp_depth(cfg)};
  ProjectorParams projector = init_projector(shape, rng);
  projector.bn_momentum = cfg.bn_momentum;
  return make_model(cfg.variant, std::move(encoder), std::move(projector), cfg.decay);
}

TrainReport train(const TrainConfig& cfg, const TrainInputs& inputs, const TrainHooks& hooks) {
  validate(cfg);
  require(inputs.corpus.size() >= cfg.batch_size, ErrorKind::InvalidArgument,
          "train: corpus has " + std::to_string(inputs.corpus.size()) +
              " sentences, fewer than one batch of " + std::to_string(cfg.batch_size));
  require(!inputs.dev.empty(), ErrorKind::EmptyInput, "train: dev set is empty");

  TrainReport report;
  report.vocab = inputs.vocab ? *inputs.vocab : Vocab::build(inputs.corpus, cfg.min_count);
  const Vocab& vocab = report.vocab;

  std::vector<TokenRow> corpus_rows;
  corpus_rows.reserve(inputs.corpus.size());
  for (const auto& s : inputs.corpus) corpus_rows.push_back(tokenize(s, vocab, cfg.max_len));
  const PreparedPairs dev = prepare_pairs(inputs.dev, vocab, cfg.max_len);

  Model model = init_model(cfg, vocab.size());
  Objective objective(cfg.objective, resolved_projector_out(cfg));
  AdamState adam = AdamState::for_parameters(trainable_parameters(model), cfg.adam);

  RngStream shuffle_rng(cfg.seed, "shuffle");
  RngStream dropout_a(cfg.seed, "dropout-view-1");
  RngStream dropout_b(cfg.seed, "dropout-view-2");

  const std::size_t steps_per_epoch = corpus_rows.size() / cfg.batch_size;
  report.total_steps = steps_per_epoch * cfg.epochs;
  const auto eval_steps = evaluation_steps(report.total_steps, cfg.eval_count);
  std::size_t next_eval = 0;

  std::filesystem::path ckpt_path;
  std::string vocab_name;
  if (inputs.out_dir) {
    std::filesystem::create_directories(*inputs.out_dir);
    vocab_name = "vocab.txt";
    vocab.save(*inputs.out_dir / vocab_name);
    ckpt_path = *inputs.out_dir / "best.ckpt";
  }

  const bool symmetric = cfg.objective.kind == ObjectiveKind::Byol && cfg.objective.byol_symmetric;
  MetricsRow last;
  std::size_t step = 0;

  auto evaluate = [&](std::size_t at) {
    emit(hooks, TraceEvent::Evaluate, at);
    const EvalResult r = sts_eval(model, dev, cfg.seed);
    MetricsRow row = last;
    row.step = at;
    row.spearman = r.spearman;
    row.effective_rank = r.diagnostics.spectrum.effective_rank;
    row.mean_dim_std = r.diagnostics.spectrum.mean_dim_std;
    row.mean_pairwise_cosine = r.diagnostics.mean_pairwise_cosine;
    report.rows.push_back(row);
    spdlog::info("step {} loss {:.6g} spearman {:.4f} effective_rank {:.3f}", at, row.loss,
                 row.spearman, row.effective_rank);
    if (r.spearman > report.best_spearman) {
      report.best_spearman = r.spearman;
      report.best_step = at;
      if (inputs.out_dir) {
        emit(hooks, TraceEvent::Checkpoint, at);
        Checkpoint ckpt{model, objective.state(), vocab.hash(), vocab_name,
                        {{"objective", std::string(to_string(cfg.objective.kind))},
                         {"step", std::to_string(at)},
                         {"spearman", format_double(r.spearman)}}};
        save_checkpoint(ckpt, ckpt_path);
        report.checkpoint_path = ckpt_path;
      }
    }
  };

  // A run shorter than eval_count steps evaluates the initial model at step 0.
  while (next_eval < eval_steps.size() && eval_steps[next_eval] == 0) {
    evaluate(0);
    ++next_eval;
  }

  std::vector<std::size_t> order(corpus_rows.size());
  std::vector<TokenRow> batch_rows(cfg.batch_size);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);

    for (std::size_t b = 0; b < steps_per_epoch; ++b) {
      ++step;
      for (std::size_t k = 0; k < cfg.batch_size; ++k)
        batch_rows[k] = corpus_rows[order[b * cfg.batch_size + k]];
      const TokenBatch batch = make_batch(batch_rows);

      try {
        const RngStream swap_a = dropout_b;
        const RngStream swap_b = dropout_a;
        emit(hooks, TraceEvent::Forward, step);
        const PairForward fwd = forward_pair(model, batch, Mode::Train, dropout_a, dropout_b);
        emit(hooks, TraceEvent::Loss, step);
        LossOutput loss = objective.evaluate(fwd.view_a, fwd.view_b);
        require(std::isfinite(loss.loss), ErrorKind::NonFinite, "non-finite loss");
        emit(hooks, TraceEvent::Backward, step);
        ModelGrads grads = backward_pair(model, fwd, loss.grad_a, loss.grad_b);
        update_running_stats(model, fwd);

        if (symmetric) {
          // Same dropout masks, online and target roles swapped; average both directions.
          RngStream sa = swap_a, sb = swap_b;
          const PairForward fwd2 = forward_pair(model, batch, Mode::Train, sa, sb);
          LossOutput loss2 = objective.evaluate(fwd2.view_a, fwd2.view_b);
          require(std::isfinite(loss2.loss), ErrorKind::NonFinite, "non-finite loss");
          ModelGrads grads2 = backward_pair(model, fwd2, loss2.grad_a, loss2.grad_b);
          update_running_stats(model, fwd2);
          grads.encoder += grads2.encoder;
          grads.projector += grads2.projector;
          scale_gradients(grads, 0.5);
          loss.loss = 0.5 * (loss.loss + loss2.loss);
          for (std::size_t c = 0; c < loss.components.size(); ++c)
            loss.components[c].value = 0.5 * (loss.components[c].value + loss2.components[c].value);
        }

        if (cfg.clip_norm > 0.0) clip_global_norm(grads, cfg.clip_norm);
        emit(hooks, TraceEvent::AdamStep, step);
        adam_step(trainable_parameters(model), parameter_gradients(grads), adam, cfg.learning_rate);
        if (model.target && !hooks.skip_ema) {
          emit(hooks, TraceEvent::EmaUpdate, step);
          ema_update_in_place(model.encoder, *model.target);
        }
        apply_components(last, loss);

        while (next_eval < eval_steps.size() && eval_steps[next_eval] == step) {
          evaluate(step);
          ++next_eval;
        }
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NonFinite && e.kind() != ErrorKind::SingularMatrix) throw;
        report.aborted = true;
        report.abort_step = step;
        report.abort_reason = e.what();
        MetricsRow diag;
        diag.step = step;
        diag.loss = std::nan("");
        diag.spearman = std::nan("");
        diag.effective_rank = std::nan("");
        diag.mean_dim_std = std::nan("");
        report.rows.push_back(diag);
        spdlog::error("training aborted at step {}: {}", step, e.what());
        report.final_model = std::move(model);
        return report;
      }
    }
  }
  report.final_model = std::move(model);
  return report;
}

}  // namespace unsee
