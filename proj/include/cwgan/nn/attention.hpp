#pragma once

#include <cstdint>
#include <vector>

#include "cwgan/nn/layers.hpp"

namespace cwgan::inline CWGAN_PRECISION_NS::nn {

enum class MaskKind { none, padding, causal, combined };

/// Boolean attention gate per batch element, [batch, query_len, key_len];
/// true means the key may be attended.
struct AttentionMask {
  MaskKind kind = MaskKind::none;
  std::size_t batch = 0;
  std::size_t query_len = 0;
  std::size_t key_len = 0;
  std::vector<std::uint8_t> allowed;

  bool at(std::size_t b, std::size_t q, std::size_t k) const {
    return allowed[(b * query_len + q) * key_len + k] != 0;
  }

  static AttentionMask all(std::size_t batch, std::size_t query_len, std::size_t key_len);
  /// Masks key columns whose token equals `pad_id`. `key_ids` is [batch, key_len].
  static AttentionMask padding(std::span<const std::int32_t> key_ids, std::size_t batch,
                               std::size_t key_len, std::size_t query_len, std::int32_t pad_id);
  /// Lower-triangular mask replicated over the batch.
  static AttentionMask causal(std::size_t batch, std::size_t length);
  /// Logical AND of two masks of identical dimensions.
  static AttentionMask combine(const AttentionMask& a, const AttentionMask& b);
};

/// Logit offset applied to masked positions before the softmax.
inline constexpr Scalar kMaskedLogit = Scalar(-1e9);

/// Scaled dot-product attention on [..., heads, q_len, head_dim] inputs.
/// `bias` holds 0 for visible and kMaskedLogit for hidden keys, shaped like the
/// score matrix. When `weights_out` is set it receives the attention weights.
Tensor scaled_dot_product_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                    const Tensor& bias, double dropout_rate,
                                    const ForwardContext& ctx, Tensor* weights_out = nullptr);

/// Expands a mask into the additive bias for `heads` heads, [batch, heads, q, k].
/// Rows with no visible key are redirected to key 0.
Tensor mask_bias(const AttentionMask& mask, std::size_t heads);

class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(std::size_t d_model, std::size_t n_heads, double dropout_rate, Rng& rng);
  MultiHeadAttention(LinearLayer query, LinearLayer key, LinearLayer value, LinearLayer output,
                     std::size_t n_heads, double dropout_rate);

  /// query_input [batch, q_len, d_model]; memory [batch, k_len, d_model].
  Tensor forward(const Tensor& query_input, const Tensor& memory, const AttentionMask& mask,
                 const ForwardContext& ctx, Tensor* weights_out = nullptr) const;

  std::size_t n_heads() const { return n_heads_; }
  std::size_t d_model() const { return d_model_; }
  std::size_t head_dim() const { return d_model_ / n_heads_; }

  void collect_parameters(const std::string& prefix, ad::ParameterList& out) const;

 private:
  Tensor split_heads(const Tensor& x) const;
  Tensor merge_heads(const Tensor& x) const;

  std::size_t d_model_ = 0;
  std::size_t n_heads_ = 1;
  double dropout_rate_ = 0.0;
  LinearLayer query_;
  LinearLayer key_;
  LinearLayer value_;
  LinearLayer output_;
};

}  // namespace cwgan::inline CWGAN_PRECISION_NS::nn
