#include "unsee/cli/commands.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>

#include "unsee/cli/config_file.hpp"
#include "unsee/error.hpp"
#include "unsee/format.hpp"
#include "unsee/training/checkpoint.hpp"
#include "unsee/training/trainer.hpp"

namespace unsee {

namespace {

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonFinite:
    case ErrorKind::SingularMatrix:
    case ErrorKind::TrainingAborted:
    case ErrorKind::DegenerateBatch:
    case ErrorKind::UndefinedCorrelation:
    case ErrorKind::ShapeMismatch:
      return kExitAborted;
    default:
      return kExitInputError;
  }
}

template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error (io): " << e.what() << '\n';
    return kExitInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitAborted;
  }
}

void require_file(const std::filesystem::path& p, std::string_view what) {
  require(std::filesystem::is_regular_file(p), ErrorKind::Io,
          std::string(what) + " not found: " + p.string());
}

struct LoadedModel {
  Checkpoint ckpt;
  Vocab vocab;
};

LoadedModel load_with_vocab(const std::filesystem::path& checkpoint) {
  require_file(checkpoint, "checkpoint");
  Checkpoint ckpt = load_checkpoint(checkpoint);
  require(!ckpt.vocab_file.empty(), ErrorKind::CheckpointMismatch,
          "checkpoint does not name its vocabulary file");
  const auto vocab_path = checkpoint.parent_path() / ckpt.vocab_file;
  require_file(vocab_path, "vocabulary");
  Vocab vocab = Vocab::load(vocab_path);
  require(vocab.hash() == ckpt.vocab_hash, ErrorKind::CheckpointMismatch,
          "vocabulary " + vocab_path.string() + " does not match the checkpoint hash");
  require(vocab.size() == ckpt.model.encoder.vocab_size(), ErrorKind::CheckpointMismatch,
          "vocabulary size differs from the embedding table");
  return {std::move(ckpt), std::move(vocab)};
}

void print_collapse(std::ostream& out, const CollapseReport& r) {
  out << "effective_rank=" << format_double(r.spectrum.effective_rank) << '\n'
      << "mean_dim_std=" << format_double(r.spectrum.mean_dim_std) << '\n'
      << "mean_pairwise_cosine=" << format_double(r.mean_pairwise_cosine) << '\n'
      << "cosine_pairs=" << r.sampled_pairs << '\n'
      << "eigenvalues=";
  for (std::size_t i = 0; i < r.spectrum.eigenvalues.size(); ++i)
    out << (i ? "," : "") << format_double(r.spectrum.eigenvalues[i]);
  out << '\n';
}

}  // namespace

int cmd_train(const std::filesystem::path& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    require_file(config, "config");
    const RunConfig rc = load_run_config(config);
    require_file(rc.corpus, "corpus");
    require_file(rc.dev, "dev set");
    const auto corpus = read_corpus(rc.corpus);
    const auto dev = read_pairs_tsv(rc.dev);
    TrainInputs inputs{corpus, dev, std::nullopt, rc.out_dir};
    if (rc.vocab) {
      require_file(*rc.vocab, "vocabulary");
      inputs.vocab = Vocab::load(*rc.vocab);
    }
    const TrainReport report = train(rc.train, inputs);
    write_metrics_csv(rc.out_dir / "metrics.csv", report.rows);
    if (report.aborted) {
      err << "training aborted at step " << report.abort_step << ": " << report.abort_reason << '\n';
      return static_cast<int>(kExitAborted);
    }
    out << "best_spearman=" << format_double(report.best_spearman)
        << " best_step=" << report.best_step << '\n';
    return static_cast<int>(kExitOk);
  });
}

int cmd_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& pairs,
             std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const LoadedModel m = load_with_vocab(checkpoint);
    require_file(pairs, "pairs file");
    const auto labeled = read_pairs_tsv(pairs);
    const EvalResult r = sts_eval(m.ckpt.model, labeled, m.vocab);
    out << "spearman=" << format_double(r.spearman * 100.0) << '\n'
        << "pairs=" << r.n_pairs << '\n';
    print_collapse(out, r.diagnostics);
    return static_cast<int>(kExitOk);
  });
}

int cmd_gradcheck(const GradcheckOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const GradcheckReport report = run_gradcheck(opts);
    for (const auto& w : report.worst_per_target())
      out << w.target << " max_rel_error=" << format_double(w.rel_error)
          << (w.passed() ? " ok" : " FAIL") << '\n';
    if (report.passed()) return static_cast<int>(kExitOk);
    for (const auto& c : report.cases)
      if (!c.passed())
        err << "gradcheck failed: " << c.target << " tensor " << c.tensor << " (B=" << c.batch
            << ", d=" << c.dim << ", instance " << c.instance
            << ") rel_error=" << format_double(c.rel_error) << '\n';
    return static_cast<int>(kExitCheckFailed);
  });
}

int cmd_gen_corpus(const SyntheticSpec& spec, const std::filesystem::path& dir, std::ostream& out,
                   std::ostream& err) {
  return guarded(err, [&] {
    const SyntheticCorpus c = generate_corpus(spec);
    write_corpus(c, dir);
    out << "wrote " << c.sentences.size() << " sentences to " << (dir / "corpus.txt").string()
        << " and " << c.dev.size() << " pairs to " << (dir / "dev.tsv").string() << '\n';
    return static_cast<int>(kExitOk);
  });
}

int cmd_diagnose(const std::filesystem::path& checkpoint, const std::filesystem::path& corpus,
                 std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const LoadedModel m = load_with_vocab(checkpoint);
    require_file(corpus, "corpus");
    const auto sentences = read_corpus(corpus);
    const TokenBatch batch = tokenize_batch(sentences, m.vocab, m.ckpt.model.encoder.max_len);
    const Matrix e = embed_for_eval(m.ckpt.model, batch);
    out << "sentences=" << sentences.size() << '\n';
    print_collapse(out, collapse_report(e));
    return static_cast<int>(kExitOk);
  });
}

}  // namespace unsee
