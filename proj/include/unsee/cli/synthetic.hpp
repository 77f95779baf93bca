#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "unsee/evaluation/sts.hpp"

namespace unsee {

// Topic-mixture corpus over a fixed 500-token vocabulary w000..w499. The
// first kStopTokens ids form a stop pool shared by all topics; the rest are
// dealt round-robin to topics as content tokens.
inline constexpr std::size_t kSyntheticVocab = 500;
inline constexpr std::size_t kStopTokens = 60;
inline constexpr std::size_t kDevPairs = 200;

struct SyntheticSpec {
  std::uint64_t seed = 0;
  std::size_t n_sentences = 2000;
  std::size_t n_topics = 20;
  std::size_t min_tokens = 5;
  std::size_t max_tokens = 20;
  double stop_fraction = 0.4;     // chance a token comes from the stop pool
  double off_topic = 0.1;         // chance a content token comes from another topic
  double gold_high = 0.8;         // shared topic
  double gold_low = 0.2;
  double gold_noise = 0.1;        // std of the N(0, .) noise, in units of 5
};

struct SyntheticCorpus {
  std::vector<std::string> sentences;
  std::vector<std::size_t> topics;  // topic of each sentence
  std::vector<LabeledPair> dev;
  std::vector<bool> dev_shared;
};

// All draws come from the "corpus" stream of `spec.seed`.
SyntheticCorpus generate_corpus(const SyntheticSpec& spec);

// corpus.txt (one sentence per line) and dev.tsv inside `dir` (created if needed).
void write_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir);

std::vector<std::string> read_corpus(const std::filesystem::path& path);

}  // namespace unsee
