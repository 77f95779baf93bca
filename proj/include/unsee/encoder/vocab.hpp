#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace unsee {

using TokenId = std::uint32_t;

// Lowercased (ASCII) whitespace tokenization.
std::vector<std::string> split_tokens(std::string_view sentence);

class Vocab {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kFirstToken = 2;

  Vocab();

  // Tokens seen at least `min_count` times, ordered by descending frequency
  // then lexicographically. Throws EmptyInput on an empty corpus.
  static Vocab build(std::span<const std::string> corpus, std::size_t min_count);
  // `tokens` are the non-reserved entries in id order (first one gets id 2).
  static Vocab from_tokens(std::vector<std::string> tokens);

  // One token per line; line i holds the token with id i + 2.
  static Vocab load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const;
  bool contains(std::string_view token) const;
  // Including PAD and UNK.
  std::size_t size() const noexcept { return tokens_.size(); }

  // FNV-1a over the vocab file contents; checkpoints record it.
  std::uint64_t hash() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

}  // namespace unsee
