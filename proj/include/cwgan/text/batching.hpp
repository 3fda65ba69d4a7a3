#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cwgan/text/corpus.hpp"
#include "cwgan/text/vocab.hpp"

namespace cwgan::text {

/// Padded id sequence; `ids.size()` is always the padded width.
struct TokenSequence {
  std::vector<TokenId> ids;
  std::size_t length = 0;  // tokens before padding
};

/// [BOS, tokens..., EOS] padded to `max_len`; tokens are cut to max_len - 2.
TokenSequence wrap_sequence(const std::vector<TokenId>& tokens, std::size_t max_len);

struct EncodedPair {
  TokenSequence question;       // BOS q EOS
  TokenSequence answer_in;      // BOS a
  TokenSequence answer_target;  // a EOS
};

EncodedPair encode_pair(const DialoguePair& pair, const Vocab& vocab, std::size_t max_len);

/// Row-major [batch, length] id matrix.
struct TokenMatrix {
  std::size_t batch = 0;
  std::size_t length = 0;
  std::vector<TokenId> ids;

  std::span<const TokenId> row(std::size_t b) const { return {ids.data() + b * length, length}; }
  TokenId at(std::size_t b, std::size_t t) const { return ids[b * length + t]; }
  /// Rows [begin, end).
  TokenMatrix rows(std::size_t begin, std::size_t end) const;
  static TokenMatrix from_rows(const std::vector<std::vector<TokenId>>& rows, std::size_t width);
};

/// Masks hold 1 for real tokens.
struct Batch {
  std::size_t batch = 0;
  std::size_t length = 0;
  TokenMatrix question;
  TokenMatrix answer_in;
  TokenMatrix answer_target;
  std::vector<std::uint8_t> question_mask;
  std::vector<std::uint8_t> answer_mask;
  std::vector<std::uint8_t> causal_mask;  // [length, length], 1 where key <= query
};

Batch make_batch(std::span<const EncodedPair> pairs);
/// Consecutive chunks of `batch_size`; the last one may be partial.
std::vector<Batch> make_batches(const std::vector<EncodedPair>& pairs, std::size_t batch_size);

struct Split {
  std::vector<DialoguePair> train;
  std::vector<DialoguePair> test;
};

/// Seeded shuffle, then the first round(test_ratio * n) pairs become the test set.
Split split_pairs(std::vector<DialoguePair> pairs, double test_ratio, std::uint64_t seed);

struct PreparedCorpus {
  Vocab vocab;
  Split split;
  std::vector<EncodedPair> train;
  std::vector<Batch> batches;
};

struct PrepareOptions {
  std::size_t max_len = 30;
  std::size_t batch_size = 64;
  double test_ratio = 0.2;
  std::size_t min_frequency = 3;
  std::size_t max_vocab = 20000;
  std::uint64_t seed = 5489;
};

/// Split, build the vocabulary from the train side only, encode and batch.
PreparedCorpus split_and_batch(std::vector<DialoguePair> pairs, const PrepareOptions& options);
/// Same with a fixed vocabulary.
PreparedCorpus split_and_batch(std::vector<DialoguePair> pairs, const Vocab& vocab,
                               const PrepareOptions& options);

/// Token lists of both sides of every pair, for vocabulary building.
std::vector<std::vector<std::string>> tokenized_sides(const std::vector<DialoguePair>& pairs);

}  // namespace cwgan::text
