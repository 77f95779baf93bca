#include "unsee/cli/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "unsee/error.hpp"
#include "unsee/rng.hpp"

namespace unsee {

namespace {

std::string token_name(std::size_t id) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "w%03zu", id);
  return buf;
}

struct Topics {
  std::vector<std::vector<std::size_t>> content;
};

Topics deal_topics(std::size_t n_topics) {
  Topics t;
  t.content.resize(n_topics);
  for (std::size_t id = kStopTokens; id < kSyntheticVocab; ++id)
    t.content[(id - kStopTokens) % n_topics].push_back(id);
  return t;
}

// Content tokens within a topic follow a 1/(rank+1) profile so every topic
// has a few signature words.
std::size_t draw_content(const std::vector<std::size_t>& pool, RngStream& rng) {
  double total = 0.0;
  for (std::size_t r = 0; r < pool.size(); ++r) total += 1.0 / static_cast<double>(r + 1);
  double u = rng.uniform() * total;
  for (std::size_t r = 0; r < pool.size(); ++r) {
    u -= 1.0 / static_cast<double>(r + 1);
    if (u < 0.0) return pool[r];
  }
  return pool.back();
}

std::string draw_sentence(const SyntheticSpec& spec, const Topics& topics, std::size_t topic,
                          RngStream& rng) {
  const std::size_t span = spec.max_tokens - spec.min_tokens + 1;
  const std::size_t len = spec.min_tokens + rng.uniform_index(span);
  std::string out;
  for (std::size_t i = 0; i < len; ++i) {
    std::size_t id;
    if (rng.uniform() < spec.stop_fraction) {
      id = rng.uniform_index(kStopTokens);
    } else {
      std::size_t from = topic;
      if (topics.content.size() > 1 && rng.uniform() < spec.off_topic)
        from = rng.uniform_index(topics.content.size());
      id = draw_content(topics.content[from], rng);
    }
    if (!out.empty()) out += ' ';
    out += token_name(id);
  }
  return out;
}

}  // namespace

SyntheticCorpus generate_corpus(const SyntheticSpec& spec) {
  require(spec.n_sentences >= 1, ErrorKind::InvalidArgument, "n_sentences must be >= 1");
  require(spec.n_topics >= 1, ErrorKind::InvalidArgument, "n_topics must be >= 1");
  require(spec.n_topics <= kSyntheticVocab - kStopTokens, ErrorKind::InvalidArgument,
          "n_topics must be <= " + std::to_string(kSyntheticVocab - kStopTokens));
  require(spec.min_tokens >= 1 && spec.min_tokens <= spec.max_tokens, ErrorKind::InvalidArgument,
          "bad sentence length range");

  const Topics topics = deal_topics(spec.n_topics);
  RngStream rng(spec.seed, "corpus");
  SyntheticCorpus c;
  c.sentences.reserve(spec.n_sentences);
  for (std::size_t i = 0; i < spec.n_sentences; ++i) {
    const std::size_t topic = rng.uniform_index(spec.n_topics);
    c.topics.push_back(topic);
    c.sentences.push_back(draw_sentence(spec, topics, topic, rng));
  }

  for (std::size_t i = 0; i < kDevPairs; ++i) {
    const std::size_t ta = rng.uniform_index(spec.n_topics);
    const bool shared = spec.n_topics == 1 || rng.uniform() < 0.5;
    std::size_t tb = ta;
    if (!shared) tb = (ta + 1 + rng.uniform_index(spec.n_topics - 1)) % spec.n_topics;
    LabeledPair p;
    p.sentence_a = draw_sentence(spec, topics, ta, rng);
    p.sentence_b = draw_sentence(spec, topics, tb, rng);
    const double base = shared ? spec.gold_high : spec.gold_low;
    p.gold = std::clamp(5.0 * (base + spec.gold_noise * rng.normal()), 0.0, 5.0);
    c.dev.push_back(std::move(p));
    c.dev_shared.push_back(shared);
  }
  return c;
}

void write_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec && std::filesystem::is_directory(dir), ErrorKind::Io,
          "cannot create output directory " + dir.string());
  const auto path = dir / "corpus.txt";
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  for (const auto& s : corpus.sentences) out << s << '\n';
  out.close();
  require(static_cast<bool>(out), ErrorKind::Io, "write failed: " + path.string());
  write_pairs_tsv(dir / "dev.tsv", corpus.dev);
}

std::vector<std::string> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open corpus " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    out.push_back(line);
  }
  require(!out.empty(), ErrorKind::EmptyInput, "corpus " + path.string() + " has no sentences");
  return out;
}

}  // namespace unsee
