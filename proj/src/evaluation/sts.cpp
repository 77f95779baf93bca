#include "unsee/evaluation/sts.hpp"

#include <cmath>
#include <fstream>

#include "unsee/error.hpp"
#include "unsee/format.hpp"
#include "unsee/rng.hpp"

namespace unsee {

std::vector<LabeledPair> read_pairs_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open pairs file " + path.string());
  std::vector<LabeledPair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    require(t2 != std::string::npos && line.find('\t', t2 + 1) == std::string::npos, ErrorKind::Parse,
            where + "expected 3 tab-separated columns");
    LabeledPair p{line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1), 0.0};
    require(!split_tokens(p.sentence_a).empty() && !split_tokens(p.sentence_b).empty(),
            ErrorKind::Parse, where + "empty sentence");
    try {
      p.gold = parse_double(std::string_view(line).substr(t2 + 1));
    } catch (const Error& e) {
      fail(ErrorKind::Parse, where + e.what());
    }
    require(p.gold >= 0.0 && p.gold <= 5.0, ErrorKind::OutOfRange,
            where + "gold score " + format_double(p.gold) + " outside [0, 5]");
    pairs.push_back(std::move(p));
  }
  return pairs;
}

void write_pairs_tsv(const std::filesystem::path& path, std::span<const LabeledPair> pairs) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write pairs file " + path.string());
  for (const auto& p : pairs)
    out << p.sentence_a << '\t' << p.sentence_b << '\t' << format_double(p.gold) << '\n';
  require(static_cast<bool>(out), ErrorKind::Io, "error writing " + path.string());
}

namespace {

// Squared norms, accumulated in the same order as the dot products so that a
// row paired with itself has cosine exactly 1.
std::vector<double> row_norms(const Matrix& e) {
  std::vector<double> norms(e.rows());
  for (std::size_t r = 0; r < e.rows(); ++r) {
    double s = 0.0;
    for (double v : e.row(r)) s += v * v;
    norms[r] = s;
  }
  return norms;
}

double cosine(const Matrix& e, const std::vector<double>& norms, std::size_t i, std::size_t j) {
  double dot = 0.0;
  const auto a = e.row(i);
  const auto b = e.row(j);
  for (std::size_t k = 0; k < a.size(); ++k) dot += a[k] * b[k];
  return dot / std::sqrt(norms[i] * norms[j]);
}

}  // namespace

CollapseReport collapse_report(const Matrix& e, std::uint64_t seed) {
  require(e.rows() >= 2, ErrorKind::DegenerateBatch, "collapse_report: need at least 2 embeddings");
  CollapseReport report;
  const auto norms = row_norms(e);
  for (std::size_t r = 0; r < norms.size(); ++r) {
    require(std::isfinite(norms[r]), ErrorKind::NonFinite,
            "collapse_report: embedding " + std::to_string(r) + " is not finite");
    require(norms[r] > 0.0, ErrorKind::InvalidArgument,
            "collapse_report: embedding " + std::to_string(r) + " has zero norm");
  }
  report.spectrum = effective_rank(e);

  const std::size_t n = e.rows();
  const std::size_t all_pairs = n * (n - 1) / 2;
  double sum = 0.0;
  if (all_pairs <= kMaxCosinePairs) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) sum += cosine(e, norms, i, j);
    report.sampled_pairs = all_pairs;
  } else {
    RngStream rng(seed, "subsample");
    for (std::size_t k = 0; k < kMaxCosinePairs; ++k) {
      const auto i = static_cast<std::size_t>(rng.uniform_index(n));
      auto j = static_cast<std::size_t>(rng.uniform_index(n - 1));
      if (j >= i) ++j;
      sum += cosine(e, norms, i, j);
    }
    report.sampled_pairs = kMaxCosinePairs;
  }
  report.mean_pairwise_cosine = sum / static_cast<double>(report.sampled_pairs);
  return report;
}

PreparedPairs prepare_pairs(std::span<const LabeledPair> pairs, const Vocab& vocab,
                            std::size_t max_len) {
  require(!pairs.empty(), ErrorKind::EmptyInput, "sts_eval: no pairs");
  PreparedPairs out;
  std::vector<TokenRow> rows;
  rows.reserve(2 * pairs.size());
  for (const auto& p : pairs) {
    rows.push_back(tokenize(p.sentence_a, vocab, max_len));
    rows.push_back(tokenize(p.sentence_b, vocab, max_len));
    out.text.push_back(p.sentence_a);
    out.text.push_back(p.sentence_b);
    out.gold.push_back(p.gold);
  }
  out.sentences = make_batch(rows);
  return out;
}

std::vector<double> pair_cosines(const Matrix& e, std::span<const std::string> text) {
  const auto norms = row_norms(e);
  for (std::size_t r = 0; r < norms.size(); ++r) {
    const std::string which = "sentence '" + (r < text.size() ? text[r] : std::string("?")) + "'";
    require(std::isfinite(norms[r]), ErrorKind::NonFinite, "sts_eval: non-finite embedding for " + which);
    require(norms[r] > 0.0, ErrorKind::InvalidArgument, "sts_eval: zero-norm embedding for " + which);
  }
  std::vector<double> cos(e.rows() / 2);
  for (std::size_t i = 0; i < cos.size(); ++i) cos[i] = cosine(e, norms, 2 * i, 2 * i + 1);
  return cos;
}

EvalResult sts_eval(const Model& model, const PreparedPairs& pairs, std::uint64_t seed) {
  const Matrix e = embed_for_eval(model, pairs.sentences);
  const auto cos = pair_cosines(e, pairs.text);
  EvalResult r;
  r.n_pairs = cos.size();
  r.spearman = spearman(cos, pairs.gold);
  r.diagnostics = collapse_report(e, seed);
  return r;
}

EvalResult sts_eval(const Model& model, std::span<const LabeledPair> pairs, const Vocab& vocab,
                    std::uint64_t seed) {
  return sts_eval(model, prepare_pairs(pairs, vocab, model.encoder.max_len), seed);
}

}  // namespace unsee
