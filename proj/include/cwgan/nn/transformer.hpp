#pragma once

#include "cwgan/nn/attention.hpp"

namespace cwgan::inline CWGAN_PRECISION_NS::nn {

/// Position-wise relu MLP: d_model -> ff_dim -> d_model.
class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(std::size_t d_model, std::size_t ff_dim, Rng& rng);

  Tensor forward(const Tensor& x) const;
  void collect_parameters(const std::string& prefix, ad::ParameterList& out) const;

 private:
  LinearLayer inner_;
  LinearLayer outer_;
};

struct BlockShape {
  std::size_t d_model = 64;
  std::size_t n_heads = 16;
  std::size_t ff_dim = 256;
  double dropout = 0.5;
};

// Post-norm residual blocks: x = norm(x + dropout(sublayer(x))).

class EncoderLayer {
 public:
  EncoderLayer() = default;
  EncoderLayer(const BlockShape& shape, Rng& rng);

  Tensor forward(const Tensor& x, const AttentionMask& mask, const ForwardContext& ctx) const;
  void collect_parameters(const std::string& prefix, ad::ParameterList& out) const;

 private:
  double dropout_ = 0.0;
  MultiHeadAttention self_attention_;
  FeedForward feed_forward_;
  LayerNorm attention_norm_;
  LayerNorm feed_forward_norm_;
};

class DecoderLayer {
 public:
  DecoderLayer() = default;
  DecoderLayer(const BlockShape& shape, Rng& rng);

  Tensor forward(const Tensor& x, const Tensor& memory, const AttentionMask& self_mask,
                 const AttentionMask& memory_mask, const ForwardContext& ctx) const;
  void collect_parameters(const std::string& prefix, ad::ParameterList& out) const;

 private:
  double dropout_ = 0.0;
  MultiHeadAttention self_attention_;
  MultiHeadAttention cross_attention_;
  FeedForward feed_forward_;
  LayerNorm self_norm_;
  LayerNorm cross_norm_;
  LayerNorm feed_forward_norm_;
};

}  // namespace cwgan::inline CWGAN_PRECISION_NS::nn
