#include "unsee/encoder/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include "unsee/error.hpp"

namespace unsee {

std::vector<std::string> split_tokens(std::string_view sentence) {
  std::vector<std::string> out;
  std::string current;
  for (char ch : sentence) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

Vocab::Vocab() : tokens_{"<pad>", "<unk>"} {}

Vocab Vocab::build(std::span<const std::string> corpus, std::size_t min_count) {
  require(!corpus.empty(), ErrorKind::EmptyInput, "build_vocab: corpus is empty");
  std::map<std::string, std::size_t> counts;
  for (const auto& sentence : corpus)
    for (auto& tok : split_tokens(sentence)) ++counts[std::move(tok)];

  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : counts)
    if (n >= min_count) kept.emplace_back(tok, n);
  // counts is already lexicographic, so a stable sort on frequency suffices.
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<std::string> tokens;
  tokens.reserve(kept.size());
  for (auto& [tok, n] : kept) tokens.push_back(tok);
  return from_tokens(std::move(tokens));
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  Vocab v;
  for (auto& tok : tokens) {
    require(!tok.empty(), ErrorKind::InvalidArgument, "vocab: empty token");
    require(tok.find_first_of(" \t\r\n") == std::string::npos, ErrorKind::InvalidArgument,
            "vocab: token contains whitespace: '" + tok + "'");
    const auto id = static_cast<TokenId>(v.tokens_.size());
    const bool inserted = v.ids_.emplace(tok, id).second;
    require(inserted, ErrorKind::InvalidArgument, "vocab: duplicate token '" + tok + "'");
    v.tokens_.push_back(std::move(tok));
  }
  return v;
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open vocab file " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return from_tokens(std::move(tokens));
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write vocab file " + path.string());
  for (std::size_t i = kFirstToken; i < tokens_.size(); ++i) out << tokens_[i] << '\n';
  require(static_cast<bool>(out), ErrorKind::Io, "error writing vocab file " + path.string());
}

TokenId Vocab::id(std::string_view token) const {
  const auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(TokenId id) const {
  require(id < tokens_.size(), ErrorKind::OutOfRange,
          "vocab: id " + std::to_string(id) + " out of range");
  return tokens_[id];
}

bool Vocab::contains(std::string_view token) const {
  return ids_.find(std::string(token)) != ids_.end();
}

std::uint64_t Vocab::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 0x100000001b3ULL;
  };
  for (std::size_t i = kFirstToken; i < tokens_.size(); ++i) {
    for (unsigned char c : tokens_[i]) mix(c);
    mix('\n');
  }
  return h;
}

}  // namespace unsee
