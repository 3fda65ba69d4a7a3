#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "cwgan/text/tokenizer.hpp"

namespace cwgan::text {

class VocabError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense token <-> id bijection with the five reserved ids in front.
class Vocab {
 public:
  /// Reserved tokens only.
  Vocab();

  /// Counts every token in `sentences`; keeps tokens seen at least
  /// `min_frequency` times, most frequent first (ties lexicographic), until
  /// the vocabulary holds `max_size` entries including the reserved ones.
  static Vocab build(const std::vector<std::vector<std::string>>& sentences,
                     std::size_t min_frequency, std::size_t max_size);
  /// From an ordered token list; the first five entries must be the reserved tokens.
  static Vocab from_tokens(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  bool contains(const std::string& token) const { return index_.count(token) != 0; }
  /// kUnk for unknown tokens.
  TokenId id(const std::string& token) const;
  const std::string& token(TokenId id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<TokenId> encode(const std::vector<std::string>& tokens) const;
  /// Stops at the first EOS; drops PAD/BOS/SEP; UNK renders as "<unk>".
  std::vector<std::string> decode(std::span<const TokenId> ids) const;
  std::string decode_text(std::span<const TokenId> ids) const;

  /// One token per line; the line number is the id.
  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  struct Empty {};
  explicit Vocab(Empty) {}

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Display names of the reserved ids.
const std::vector<std::string>& reserved_tokens();

}  // namespace cwgan::text
