#include <CLI11.hpp>

#include <iostream>

#include "unsee/cli/commands.hpp"
#include "unsee/log.hpp"

int main(int argc, char** argv) {
  unsee::init_logging();

  CLI::App app{"unsee: non-contrastive sentence embeddings with an EMA target network"};
  app.require_subcommand(1);
  int code = unsee::kExitOk;

  std::string config;
  auto* train = app.add_subcommand("train", "Train a model from a key=value config file");
  train->add_option("config", config, "Run config")->required();
  train->callback([&] { code = unsee::cmd_train(config, std::cout, std::cerr); });

  std::string checkpoint, pairs;
  auto* eval = app.add_subcommand("eval", "Spearman of a checkpoint on a pairs TSV");
  eval->add_option("checkpoint", checkpoint)->required();
  eval->add_option("pairs", pairs)->required();
  eval->callback([&] { code = unsee::cmd_eval(checkpoint, pairs, std::cout, std::cerr); });

  unsee::GradcheckOptions gc;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every backward pass");
  grad->add_option("--seed", gc.seed);
  grad->add_option("--instances", gc.instances)->check(CLI::PositiveNumber);
  grad->add_option("--batch-sizes", gc.batch_sizes)->delimiter(',')->check(CLI::Range(3, 8));
  grad->add_option("--dims", gc.dims)->delimiter(',')->check(CLI::Range(2, 8));
  grad->callback([&] { code = unsee::cmd_gradcheck(gc, std::cout, std::cerr); });

  unsee::SyntheticSpec spec;
  std::string out_dir;
  auto* gen = app.add_subcommand("gen-corpus", "Write a synthetic topic corpus and dev pairs");
  gen->add_option("--seed", spec.seed);
  gen->add_option("--n", spec.n_sentences)->check(CLI::PositiveNumber);
  gen->add_option("--topics", spec.n_topics)->check(CLI::PositiveNumber);
  gen->add_option("--out", out_dir)->required();
  gen->callback([&] { code = unsee::cmd_gen_corpus(spec, out_dir, std::cout, std::cerr); });

  std::string corpus;
  auto* diag = app.add_subcommand("diagnose", "Collapse report of a checkpoint on a corpus");
  diag->add_option("checkpoint", checkpoint)->required();
  diag->add_option("corpus", corpus)->required();
  diag->callback([&] { code = unsee::cmd_diagnose(checkpoint, corpus, std::cout, std::cerr); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : unsee::kExitInputError;
  }
  return code;
}
