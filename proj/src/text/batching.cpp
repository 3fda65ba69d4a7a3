#include "cwgan/text/batching.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <random>

namespace cwgan::text {

namespace {

TokenSequence padded(std::vector<TokenId> ids, std::size_t width) {
  TokenSequence seq;
  seq.length = ids.size();
  seq.ids = std::move(ids);
  seq.ids.resize(width, kPad);
  return seq;
}

}  // namespace

TokenSequence wrap_sequence(const std::vector<TokenId>& tokens, std::size_t max_len) {
  if (max_len < 3) throw std::invalid_argument("max_len must be at least 3");
  const std::size_t keep = std::min(tokens.size(), max_len - 2);
  std::vector<TokenId> ids;
  ids.reserve(max_len);
  ids.push_back(kBos);
  ids.insert(ids.end(), tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(keep));
  ids.push_back(kEos);
  return padded(std::move(ids), max_len);
}

EncodedPair encode_pair(const DialoguePair& pair, const Vocab& vocab, std::size_t max_len) {
  EncodedPair out;
  out.question = wrap_sequence(vocab.encode(tokenize(pair.question)), max_len);
  const TokenSequence answer = wrap_sequence(vocab.encode(tokenize(pair.answer)), max_len);
  std::vector<TokenId> in(answer.ids.begin(), answer.ids.begin() + static_cast<std::ptrdiff_t>(answer.length - 1));
  std::vector<TokenId> target(answer.ids.begin() + 1, answer.ids.begin() + static_cast<std::ptrdiff_t>(answer.length));
  out.answer_in = padded(std::move(in), max_len);
  out.answer_target = padded(std::move(target), max_len);
  return out;
}

TokenMatrix TokenMatrix::rows(std::size_t begin, std::size_t end) const {
  if (begin > end || end > batch) throw std::out_of_range("TokenMatrix::rows: bad range");
  TokenMatrix out;
  out.batch = end - begin;
  out.length = length;
  out.ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(begin * length),
                 ids.begin() + static_cast<std::ptrdiff_t>(end * length));
  return out;
}

TokenMatrix TokenMatrix::from_rows(const std::vector<std::vector<TokenId>>& rows, std::size_t width) {
  TokenMatrix out;
  out.batch = rows.size();
  out.length = width;
  out.ids.reserve(rows.size() * width);
  for (const auto& r : rows) {
    if (r.size() > width) throw std::invalid_argument("TokenMatrix: row longer than width");
    out.ids.insert(out.ids.end(), r.begin(), r.end());
    out.ids.resize(out.ids.size() + width - r.size(), kPad);
  }
  return out;
}

Batch make_batch(std::span<const EncodedPair> pairs) {
  if (pairs.empty()) throw std::invalid_argument("make_batch: no pairs");
  Batch batch;
  batch.batch = pairs.size();
  batch.length = pairs.front().question.ids.size();
  for (TokenMatrix* m : {&batch.question, &batch.answer_in, &batch.answer_target}) {
    m->batch = batch.batch;
    m->length = batch.length;
  }
  for (const auto& p : pairs) {
    if (p.question.ids.size() != batch.length || p.answer_in.ids.size() != batch.length ||
        p.answer_target.ids.size() != batch.length) {
      throw std::invalid_argument("make_batch: sequences of different padded width");
    }
    batch.question.ids.insert(batch.question.ids.end(), p.question.ids.begin(), p.question.ids.end());
    batch.answer_in.ids.insert(batch.answer_in.ids.end(), p.answer_in.ids.begin(), p.answer_in.ids.end());
    batch.answer_target.ids.insert(batch.answer_target.ids.end(), p.answer_target.ids.begin(),
                               p.answer_target.ids.end());
    for (TokenId id : p.question.ids) batch.question_mask.push_back(id != kPad);
    for (TokenId id : p.answer_in.ids) batch.answer_mask.push_back(id != kPad);
  }
  batch.causal_mask.assign(batch.length * batch.length, 0);
  for (std::size_t q = 0; q < batch.length; ++q)
    for (std::size_t k = 0; k <= q; ++k) batch.causal_mask[q * batch.length + k] = 1;
  return batch;
}

std::vector<Batch> make_batches(const std::vector<EncodedPair>& pairs, std::size_t batch_size) {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  std::vector<Batch> batches;
  if (!pairs.empty() && pairs.size() < batch_size) {
    std::cerr << "warning: " << pairs.size() << " training pairs is less than one batch of "
              << batch_size << "; using a single partial batch\n";
  }
  for (std::size_t start = 0; start < pairs.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, pairs.size() - start);
    batches.push_back(make_batch(std::span(pairs).subspan(start, n)));
  }
  return batches;
}

Split split_pairs(std::vector<DialoguePair> pairs, double test_ratio, std::uint64_t seed) {
  if (test_ratio < 0 || test_ratio >= 1) throw std::invalid_argument("test ratio must lie in [0, 1)");
  std::mt19937_64 rng(seed);
  // Fisher-Yates written out so the order does not depend on the standard library.
  for (std::size_t i = pairs.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(pairs[i - 1], pairs[j]);
  }
  const auto n_test = static_cast<std::size_t>(std::llround(test_ratio * static_cast<double>(pairs.size())));
  Split split;
  split.test.assign(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(n_test));
  split.train.assign(pairs.begin() + static_cast<std::ptrdiff_t>(n_test), pairs.end());
  return split;
}

std::vector<std::vector<std::string>> tokenized_sides(const std::vector<DialoguePair>& pairs) {
  std::vector<std::vector<std::string>> out;
  out.reserve(pairs.size() * 2);
  for (const auto& p : pairs) {
    out.push_back(tokenize(p.question));
    out.push_back(tokenize(p.answer));
  }
  return out;
}

PreparedCorpus split_and_batch(std::vector<DialoguePair> pairs, const PrepareOptions& options) {
  Split split = split_pairs(std::move(pairs), options.test_ratio, options.seed);
  Vocab vocab = Vocab::build(tokenized_sides(split.train), options.min_frequency, options.max_vocab);
  PreparedCorpus out;
  out.vocab = std::move(vocab);
  out.split = std::move(split);
  for (const auto& p : out.split.train) out.train.push_back(encode_pair(p, out.vocab, options.max_len));
  out.batches = make_batches(out.train, options.batch_size);
  return out;
}

PreparedCorpus split_and_batch(std::vector<DialoguePair> pairs, const Vocab& vocab,
                               const PrepareOptions& options) {
  PreparedCorpus out;
  out.vocab = vocab;
  out.split = split_pairs(std::move(pairs), options.test_ratio, options.seed);
  for (const auto& p : out.split.train) out.train.push_back(encode_pair(p, out.vocab, options.max_len));
  out.batches = make_batches(out.train, options.batch_size);
  return out;
}

}  // namespace cwgan::text
