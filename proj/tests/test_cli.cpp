#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "support.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "unsee/cli/commands.hpp"
#include "unsee/cli/config_file.hpp"
#include "unsee/cli/gradcheck.hpp"
#include "unsee/cli/synthetic.hpp"
#include "unsee/evaluation/sts.hpp"
#include "unsee/format.hpp"

using namespace unsee;
using unsee::test::kind_of;
using unsee::test::TempDir;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::map<std::string, std::string> parse_dump(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

std::string value_after(const std::string& text, const std::string& key) {
  const auto at = text.find(key + "=");
  if (at == std::string::npos) return {};
  const auto start = at + key.size() + 1;
  return text.substr(start, text.find_first_of(" \n", start) - start);
}

constexpr std::string_view kPaths = "corpus=corpus.txt\ndev=dev.tsv\nout_dir=run\nobjective=vicreg\nepochs=1\n";
const std::string kBase = std::string(kPaths) + "variant=single_projection\n";

// Small corpus plus a config next to it.
struct RunFixture {
  TempDir dir{"cli"};
  explicit RunFixture(std::string extra = "batch_size=8\nembed_dim=6\neval_count=3\nlearning_rate=1e-3\n",
                      std::string variant = "single_projection") {
    SyntheticSpec spec;
    spec.seed = 2;
    spec.n_sentences = 64;
    spec.n_topics = 3;
    write_corpus(generate_corpus(spec), dir.path());
    std::ofstream(dir / "run.conf") << kPaths << "variant=" << variant << "\n" << extra;
  }
};

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("reference hyperparameters are accepted") {
    const RunConfig rc = parse_run_config("corpus=corpus.txt\ndev=dev.tsv\nout_dir=run\nvariant=projection\nepochs=1\n"
                                          "objective=barlow_twins\nlambda=0.0051\ndecay=0.999\n",
                                          "/base");
    CHECK(rc.train.objective.kind == ObjectiveKind::BarlowTwins);
    CHECK(rc.train.objective.barlow.lambda == 0.0051);
    CHECK(rc.train.decay == 0.999);
    CHECK(rc.corpus == std::filesystem::path("/base/corpus.txt"));
    CHECK(rc.out_dir == std::filesystem::path("/base/run"));
  }
  SUBCASE("comments, blanks and whitespace") {
    const RunConfig rc = parse_run_config(std::string(kBase) + "\n# note\n  seed = 42  # trailing\n");
    CHECK(rc.train.seed == 42);
  }
  SUBCASE("unknown key names it") {
    try {
      parse_run_config(std::string(kBase) + "lamda=0.1\n");
      FAIL("expected a config error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Config);
      CHECK(std::string(e.what()).find("lamda") != std::string::npos);
    }
  }
  SUBCASE("bad values, duplicates, missing keys") {
    CHECK(kind_of([] { parse_run_config(std::string(kBase) + "batch_size=many\n"); }) == ErrorKind::Config);
    CHECK(kind_of([] { parse_run_config(std::string(kBase) + "batch_size=-3\n"); }) == ErrorKind::Config);
    CHECK(kind_of([] { parse_run_config(std::string(kBase) + "feedforward=maybe\n"); }) == ErrorKind::Config);
    CHECK(kind_of([] { parse_run_config(std::string(kBase) + "seed=1\nseed=2\n"); }) == ErrorKind::Config);
    CHECK(kind_of([] { parse_run_config(std::string(kBase) + "variant=twin\n"); }) == ErrorKind::Config);
    CHECK(kind_of([] { parse_run_config(std::string(kBase) + "no equals sign\n"); }) == ErrorKind::Config);
    CHECK(kind_of([] { parse_run_config(std::string(kBase) + "batch_size=1\n"); }) == ErrorKind::Config);
    for (auto key : required_config_keys()) {
      std::string text;
      std::istringstream in{kBase};
      for (std::string line; std::getline(in, line);)
        if (line.rfind(std::string(key) + "=", 0) != 0) text += line + "\n";
      CHECK(kind_of([&] { parse_run_config(text); }) == ErrorKind::Config);
    }
  }
  SUBCASE("dump round-trips through the parser") {
    RunConfig rc = parse_run_config(std::string(kBase) + "corinfomax_orientation=history\nbyol_symmetric=yes\n");
    const std::string dump = dump_train_config(rc.train);
    const RunConfig back = parse_run_config("corpus=a\ndev=b\nout_dir=c\n" + dump);
    CHECK(dump_train_config(back.train) == dump);
    CHECK(back.train.objective.corinfomax.orientation == EmaOrientation::HistoryWeight);
    CHECK(back.train.objective.byol_symmetric);
  }
}

TEST_CASE("default config dump carries the reference constants") {
  TrainConfig cfg;
  cfg.epochs = 1;
  const auto kv = parse_dump(dump_train_config(cfg));
  const std::map<std::string, double> expected{
      {"lambda", 0.0051},          {"vicreg_w_inv", 25},        {"vicreg_w_var", 25},
      {"vicreg_w_cov", 1},         {"corinfomax_r_ini", 1},     {"corinfomax_la_r", 0.01},
      {"corinfomax_la_mu", 0.01},  {"corinfomax_r_eps_weight", 1e-6},
      {"corinfomax_w_cov", 0.2},   {"corinfomax_w_inv", 2000},  {"decay", 0.999},
      {"eval_count", 20},          {"batch_size", 32},          {"learning_rate", 1e-4},
      {"max_len", 64}};
  for (const auto& [key, value] : expected) {
    INFO(key);
    REQUIRE(kv.count(key) == 1);
    CHECK(parse_double(kv.at(key)) == value);
  }
  std::vector<std::string> keys;
  for (const auto& [k, v] : kv) keys.push_back(k);
  for (auto k : known_config_keys()) {
    const bool path_key = k == "corpus" || k == "dev" || k == "out_dir" || k == "vocab";
    CHECK((std::find(keys.begin(), keys.end(), std::string(k)) != keys.end()) != path_key);
  }
}

TEST_CASE("gen-corpus") {
  TempDir a("gen-a"), b("gen-b");
  std::ostringstream out, err;
  SyntheticSpec spec;
  spec.seed = 9;
  REQUIRE(cmd_gen_corpus(spec, a.path(), out, err) == kExitOk);
  REQUIRE(cmd_gen_corpus(spec, b.path(), out, err) == kExitOk);
  CHECK(slurp(a / "corpus.txt") == slurp(b / "corpus.txt"));
  CHECK(slurp(a / "dev.tsv") == slurp(b / "dev.tsv"));

  const auto sentences = read_corpus(a / "corpus.txt");
  CHECK(sentences.size() == 2000);
  std::set<std::string> vocab;
  for (const auto& s : sentences) {
    const auto toks = split_tokens(s);
    CHECK(toks.size() >= 5);
    CHECK(toks.size() <= 20);
    vocab.insert(toks.begin(), toks.end());
  }
  CHECK(vocab.size() <= kSyntheticVocab);

  const auto dev = read_pairs_tsv(a / "dev.tsv");
  CHECK(dev.size() == kDevPairs);
  const auto [lo, hi] = std::minmax_element(dev.begin(), dev.end(),
                                            [](const auto& x, const auto& y) { return x.gold < y.gold; });
  CHECK(hi->gold - lo->gold >= 3.0);

  SUBCASE("one topic: every pair shares it") {
    spec.n_topics = 1;
    const SyntheticCorpus c = generate_corpus(spec);
    CHECK(std::all_of(c.dev_shared.begin(), c.dev_shared.end(), [](bool s) { return s; }));
    for (const auto& p : c.dev) CHECK(std::abs(p.gold - 4.0) < 2.5);
  }
  SUBCASE("bad arguments and unwritable paths") {
    spec.n_sentences = 0;
    CHECK(cmd_gen_corpus(spec, a.path(), out, err) == kExitInputError);
    spec.n_sentences = 10;
    std::ofstream(a / "file") << "x";
    CHECK(cmd_gen_corpus(spec, a / "file" / "sub", out, err) == kExitInputError);
  }
}

TEST_CASE("gradcheck") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::ostringstream out, err;
    GradcheckOptions opts;
    opts.seed = seed;
    CHECK(cmd_gradcheck(opts, out, err) == kExitOk);
    for (auto target : {"barlow_twins", "vicreg", "corinfomax", "byol", "encoder", "projector"})
      CHECK(out.str().find(std::string(target) + " max_rel_error=") != std::string::npos);
  }
  SUBCASE("a perturbed gradient fails with the offending tensor") {
    std::ostringstream out, err;
    GradcheckOptions opts;
    opts.perturb = 1e-3;
    CHECK(cmd_gradcheck(opts, out, err) == kExitCheckFailed);
    CHECK(out.str().find("FAIL") != std::string::npos);
    CHECK(err.str().find("barlow_twins") != std::string::npos);
    CHECK(err.str().find("z_a") != std::string::npos);
  }
  SUBCASE("instance grid") {
    GradcheckOptions opts;
    const GradcheckReport r = run_gradcheck(opts);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    std::size_t bt_instances = 0;
    for (const auto& c : r.cases)
      if (c.target == "barlow_twins" && c.tensor == "z_a") {
        ++bt_instances;
        seen.insert({c.batch, c.dim});
      }
    CHECK(bt_instances >= 20);
    CHECK(seen.size() == 9);
  }
}

TEST_CASE("train, eval, diagnose") {
  RunFixture fx;
  std::ostringstream out, err;
  REQUIRE(cmd_train(fx.dir / "run.conf", out, err) == kExitOk);
  const std::string summary = out.str();
  CHECK(summary.find("best_spearman=") != std::string::npos);
  CHECK(summary.find(" best_step=") != std::string::npos);
  const std::string csv = slurp(fx.dir / "run" / "metrics.csv");
  CHECK(csv.rfind("step,loss,loss_inv,loss_var,loss_cov,spearman,effective_rank,mean_dim_std\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);

  SUBCASE("second run writes the same metrics") {
    std::filesystem::rename(fx.dir / "run", fx.dir / "first");
    std::ostringstream o2, e2;
    REQUIRE(cmd_train(fx.dir / "run.conf", o2, e2) == kExitOk);
    CHECK(slurp(fx.dir / "run" / "metrics.csv") == slurp(fx.dir / "first" / "metrics.csv"));
    CHECK(o2.str() == summary);
  }
  SUBCASE("eval reproduces the best score") {
    std::ostringstream o2, e2;
    REQUIRE(cmd_eval(fx.dir / "run" / "best.ckpt", fx.dir / "dev.tsv", o2, e2) == kExitOk);
    const double best = parse_double(value_after(summary, "best_spearman"));
    const double again = parse_double(value_after(o2.str(), "spearman")) / 100.0;
    CHECK(std::abs(again - best) <= 1e-12);
    CHECK(o2.str().find("effective_rank=") != std::string::npos);
    CHECK(o2.str().find("mean_pairwise_cosine=") != std::string::npos);
  }
  SUBCASE("eval input errors") {
    std::ostringstream o2, e2;
    CHECK(cmd_eval(fx.dir / "missing.ckpt", fx.dir / "dev.tsv", o2, e2) == kExitInputError);
    CHECK(cmd_eval(fx.dir / "run" / "best.ckpt", fx.dir / "missing.tsv", o2, e2) == kExitInputError);
    std::ofstream(fx.dir / "seven.tsv") << "w100 w101\tw102\t3\nw100\tw200\t7.0\n";
    CHECK(cmd_eval(fx.dir / "run" / "best.ckpt", fx.dir / "seven.tsv", o2, e2) == kExitInputError);
    CHECK(e2.str().find(":2:") != std::string::npos);
    std::ofstream(fx.dir / "garbage.ckpt") << "hello";
    CHECK(cmd_eval(fx.dir / "garbage.ckpt", fx.dir / "dev.tsv", o2, e2) == kExitInputError);
  }
  SUBCASE("diagnose") {
    std::ostringstream o2, e2;
    REQUIRE(cmd_diagnose(fx.dir / "run" / "best.ckpt", fx.dir / "corpus.txt", o2, e2) == kExitOk);
    CHECK(o2.str().find("sentences=64") != std::string::npos);
    CHECK(o2.str().find("effective_rank=") != std::string::npos);
  }
}

TEST_CASE("train exit codes") {
  SUBCASE("config error names the key") {
    RunFixture fx("lamda=0.1\n");
    std::ostringstream out, err;
    CHECK(cmd_train(fx.dir / "run.conf", out, err) == kExitInputError);
    CHECK(err.str().find("lamda") != std::string::npos);
  }
  SUBCASE("missing config") {
    std::ostringstream out, err;
    CHECK(cmd_train("/nonexistent/run.conf", out, err) == kExitInputError);
  }
  SUBCASE("missing corpus") {
    RunFixture fx;
    std::filesystem::remove(fx.dir / "corpus.txt");
    std::ostringstream out, err;
    CHECK(cmd_train(fx.dir / "run.conf", out, err) == kExitInputError);
  }
  SUBCASE("non-finite loss aborts with the step") {
    RunFixture fx("batch_size=8\nembed_dim=6\nlearning_rate=1e300\n", "projection");
    std::ostringstream out, err;
    CHECK(cmd_train(fx.dir / "run.conf", out, err) == kExitAborted);
    INFO(err.str());
    CHECK(err.str().find("training aborted at step ") != std::string::npos);
  }
}
