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

/// Encoder-decoder transformer over a token vocabulary. One input embedding
/// is shared by questions and decoder inputs.
class GeneratorModel {
 public:
  GeneratorModel(const GeneratorConfig& config, nn::Rng& rng);

  const GeneratorConfig& config() const { return config_; }
  std::size_t vocab_size() const { return config_.vocab_size; }

  /// Encoder memory, [batch, length, d_model]. Rejects all-PAD rows and ids
  /// outside the vocabulary.
  Tensor encode(const TokenMatrix& question, const ForwardContext& ctx) const;

  /// Decoder states for `answer_in` (causal self-attention, padding-masked
  /// cross-attention), [batch, answer_length, d_model].
  Tensor decode(const Tensor& memory, const TokenMatrix& question, const TokenMatrix& answer_in,
                const ForwardContext& ctx) const;

  /// [batch, length, vocab]; position t predicts the token after answer_in[t].
  Tensor teacher_forced_logits(const TokenMatrix& question, const TokenMatrix& answer_in,
                               const ForwardContext& ctx) const;

  Tensor output_logits(const Tensor& hidden) const { return output_head_.forward(hidden); }

  ad::ParameterList parameters() const;
  const nn::InputEmbedding& embedding() const { return embedding_; }

 private:
  void check_tokens(const TokenMatrix& m, const char* what, bool reject_empty_rows) const;

  GeneratorConfig config_;
  nn::InputEmbedding embedding_;
  std::vector<nn::EncoderLayer> encoder_;
  std::vector<nn::DecoderLayer> decoder_;
  nn::LinearLayer output_head_;
};

/// Mean token NLL over positions whose target is not PAD.
Tensor mle_loss(const Tensor& logits, const TokenMatrix& target);

/// Fraction of non-PAD target positions where the argmax logit is the target.
double next_token_accuracy(const Tensor& logits, const TokenMatrix& target);

struct GumbelRollout {
  TokenMatrix hard;         // [batch, steps] argmax tokens (PAD/BOS/SEP excluded)
  Tensor soft;              // [batch, steps, vocab] Gumbel-softmax rows
  Tensor straight_through;  // one-hot of `hard` forward, gradient into `soft`
};

/// Free-running decode of `steps` tokens (default max_len). At each step
/// soft = softmax((logits + g) / tau) with g = -log(-log u); the argmax token
/// is fed to the next step.
GumbelRollout gumbel_generate(const GeneratorModel& model, const TokenMatrix& question,
                              nn::Rng& noise_rng, double temperature, const ForwardContext& ctx,
                              std::size_t steps = 0);

/// Greedy decode from BOS without dropout or graph recording. Stops at EOS
/// (not included) or after `max_steps` tokens. PAD, BOS and SEP never win.
std::vector<std::vector<TokenId>> infer(const GeneratorModel& model, const TokenMatrix& question,
                                        std::size_t max_steps);
std::vector<TokenId> infer(const GeneratorModel& model, std::span<const TokenId> question,
                           std::size_t max_steps);

/// Sum of squared gradient entries per top-level block name prefix.
std::vector<std::pair<std::string, double>> gradient_norms_by_block(const ad::ParameterList& params,
                                                                    std::size_t depth);

}  // namespace cwgan::inline CWGAN_PRECISION_NS::model
