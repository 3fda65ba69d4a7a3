#pragma once

#include <vector>

#include "cwgan/config.hpp"
#include "cwgan/nn/transformer.hpp"
#include "cwgan/text/batching.hpp"

namespace cwgan::inline CWGAN_PRECISION_NS::model {

using ad::Tensor;
using nn::ForwardContext;
using text::TokenId;
using text::TokenMatrix;

enum class AnswerSource { real, generated };

/// Batch of [BOS, question..., SEP, answer..., EOS] rows padded to the
/// critic width. Generated answers may carry soft rows that replace the
/// table lookup for the answer tokens.
struct PairBatch {
  TokenMatrix tokens;
  AnswerSource source = AnswerSource::real;
  std::vector<std::size_t> answer_begin;  // first answer position per row
  std::vector<std::size_t> soft_count;    // answer positions fed from soft rows
  Tensor soft_rows;                       // [batch, steps, vocab] or undefined

  std::size_t size() const { return tokens.batch; }
  bool has_soft_rows() const { return soft_rows.defined(); }
};

/// Content tokens of a wrapped/padded row: drops BOS, stops at EOS or PAD.
std::vector<TokenId> strip_wrapping(std::span<const TokenId> row);

/// Pairs of each question with its reference answer. Both matrices hold
/// wrapped sequences (question = BOS q EOS, answer = a EOS or BOS a EOS).
PairBatch make_real_pairs(const TokenMatrix& question, const TokenMatrix& answer, std::size_t max_len);

/// Pairs of each question with a generated answer: hard tokens up to and
/// including the first EOS, at most max_len - 2 of them. With `rows` set,
/// those positions are embedded from rows[b, t] instead of the table.
PairBatch make_fake_pairs(const TokenMatrix& question, const TokenMatrix& generated, std::size_t max_len,
                          const Tensor& rows = {});

class CriticModel {
 public:
  CriticModel(const CriticConfig& config, std::size_t vocab_size, std::size_t max_len, nn::Rng& rng);

  const CriticConfig& config() const { return config_; }
  std::size_t width() const { return width_; }
  std::size_t vocab_size() const { return embedding_.vocab_size(); }

  /// One unbounded score per pair, shape [batch].
  Tensor score(const PairBatch& pairs, const ForwardContext& ctx) const;

  ad::ParameterList parameters() const;
  /// Clamps every parameter into [-c, c].
  void clip_weights(double c) const;
  /// Largest |value| over all parameters.
  double max_abs_weight() const;

 private:
  void validate(const PairBatch& pairs) const;
  Tensor embed(const PairBatch& pairs, const ForwardContext& ctx) const;

  CriticConfig config_;
  std::size_t width_ = 0;
  nn::InputEmbedding embedding_;
  std::vector<nn::EncoderLayer> encoder_;
  nn::LinearLayer score_head_;
};

/// mean(score(fake)) - mean(score(real)).
Tensor critic_loss(const CriticModel& critic, const PairBatch& real, const PairBatch& fake,
                   const ForwardContext& ctx);

/// -mean(score(fake)) with the critic's parameters excluded from the graph.
Tensor generator_adv_loss(const CriticModel& critic, const PairBatch& fake, const ForwardContext& ctx);

/// Turns off requires_grad on a parameter list and restores it on exit.
class FreezeGuard {
 public:
  explicit FreezeGuard(ad::ParameterList params);
  ~FreezeGuard();
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  ad::ParameterList params_;
  std::vector<bool> previous_;
};

// Classic sigmoid-GAN objectives on raw scores, kept as reference points.
// Discriminator: -mean(log sigma(real)) - mean(log(1 - sigma(fake))).
Tensor vanilla_discriminator_loss(const Tensor& real_scores, const Tensor& fake_scores);
// Generator: mean(log(1 - sigma(fake))).
Tensor vanilla_generator_loss(const Tensor& fake_scores);

}  // namespace cwgan::inline CWGAN_PRECISION_NS::model
