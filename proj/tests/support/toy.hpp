#pragma once

// Synthetic copy task: the answer repeats the question.

#include <random>
#include <string>
#include <vector>

#include "cwgan/text/batching.hpp"

namespace cwgan::testing {

struct ToyCorpus {
  text::Vocab vocab;
  std::vector<text::DialoguePair> pairs;
  std::vector<text::EncodedPair> encoded;
};

inline ToyCorpus copy_corpus(std::size_t vocab_size, std::size_t n_pairs, std::size_t max_len, std::uint64_t seed,
                             std::size_t min_words = 1) {
  std::vector<std::string> tokens = text::reserved_tokens();
  const std::size_t content = vocab_size - tokens.size();
  for (std::size_t i = 0; i < content; ++i) tokens.push_back("t" + std::to_string(i));
  ToyCorpus out{text::Vocab::from_tokens(tokens), {}, {}};
  std::mt19937_64 rng(seed);
  for (std::size_t p = 0; p < n_pairs; ++p) {
    const std::size_t len = min_words + rng() % (max_len - 2 - min_words + 1);
    std::string sentence;
    for (std::size_t i = 0; i < len; ++i) sentence += (i ? " t" : "t") + std::to_string(rng() % content);
    out.pairs.push_back({sentence, sentence});
    out.encoded.push_back(text::encode_pair(out.pairs.back(), out.vocab, max_len));
  }
  return out;
}

}  // namespace cwgan::testing
