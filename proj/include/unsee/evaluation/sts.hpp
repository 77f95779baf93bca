#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "unsee/architectures/model.hpp"
#include "unsee/encoder/vocab.hpp"
#include "unsee/numerics/stats.hpp"

namespace unsee {

struct LabeledPair {
  std::string sentence_a;
  std::string sentence_b;
  double gold = 0.0;  // [0, 5]
};

// `sentence_a<TAB>sentence_b<TAB>gold` per line. Any malformed line is a
// Parse error carrying its 1-based line number; gold outside [0, 5] is OutOfRange.
std::vector<LabeledPair> read_pairs_tsv(const std::filesystem::path& path);
void write_pairs_tsv(const std::filesystem::path& path, std::span<const LabeledPair> pairs);

struct CollapseReport {
  SpectrumReport spectrum;
  double mean_pairwise_cosine = 0.0;
  std::size_t sampled_pairs = 0;
};

inline constexpr std::size_t kMaxCosinePairs = 10000;

// Effective rank plus mean pairwise cosine; all pairs when there are at most
// 10,000 of them, otherwise 10,000 pairs drawn from the "subsample" stream of `seed`.
CollapseReport collapse_report(const Matrix& embeddings, std::uint64_t seed = 0);

struct EvalResult {
  double spearman = 0.0;
  std::size_t n_pairs = 0;
  CollapseReport diagnostics;
};

// Tokenized dev set, reusable across evaluations of the same vocab.
struct PreparedPairs {
  TokenBatch sentences;  // a_0, b_0, a_1, b_1, ...
  std::vector<double> gold;
  std::vector<std::string> text;
};

PreparedPairs prepare_pairs(std::span<const LabeledPair> pairs, const Vocab& vocab,
                            std::size_t max_len);

EvalResult sts_eval(const Model& model, const PreparedPairs& pairs, std::uint64_t seed = 0);
EvalResult sts_eval(const Model& model, std::span<const LabeledPair> pairs, const Vocab& vocab,
                    std::uint64_t seed = 0);

// Cosine similarity per pair of embedding rows (2i, 2i+1). Throws on a zero-norm row.
std::vector<double> pair_cosines(const Matrix& embeddings, std::span<const std::string> text);

}  // namespace unsee
