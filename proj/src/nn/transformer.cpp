#include "cwgan/nn/transformer.hpp"

namespace cwgan::inline CWGAN_PRECISION_NS::nn {

FeedForward::FeedForward(std::size_t d_model, std::size_t ff_dim, Rng& rng)
    : inner_(d_model, ff_dim, Activation::relu, rng),
      outer_(ff_dim, d_model, Activation::identity, rng) {}

Tensor FeedForward::forward(const Tensor& x) const { return outer_.forward(inner_.forward(x)); }

void FeedForward::collect_parameters(const std::string& prefix, ad::ParameterList& out) const {
  inner_.collect_parameters(prefix + ".inner", out);
  outer_.collect_parameters(prefix + ".outer", out);
}

EncoderLayer::EncoderLayer(const BlockShape& shape, Rng& rng)
    : dropout_(shape.dropout),
      self_attention_(shape.d_model, shape.n_heads, shape.dropout, rng),
      feed_forward_(shape.d_model, shape.ff_dim, rng),
      attention_norm_(shape.d_model),
      feed_forward_norm_(shape.d_model) {}

Tensor EncoderLayer::forward(const Tensor& x, const AttentionMask& mask,
                             const ForwardContext& ctx) const {
  Tensor attended = self_attention_.forward(x, x, mask, ctx);
  Tensor h = attention_norm_.forward(ad::add(x, dropout(attended, dropout_, ctx)));
  Tensor ff = feed_forward_.forward(h);
  return feed_forward_norm_.forward(ad::add(h, dropout(ff, dropout_, ctx)));
}

void EncoderLayer::collect_parameters(const std::string& prefix, ad::ParameterList& out) const {
  self_attention_.collect_parameters(prefix + ".self_attention", out);
  feed_forward_.collect_parameters(prefix + ".feed_forward", out);
  attention_norm_.collect_parameters(prefix + ".attention_norm", out);
  feed_forward_norm_.collect_parameters(prefix + ".feed_forward_norm", out);
}

DecoderLayer::DecoderLayer(const BlockShape& shape, Rng& rng)
    : dropout_(shape.dropout),
      self_attention_(shape.d_model, shape.n_heads, shape.dropout, rng),
      cross_attention_(shape.d_model, shape.n_heads, shape.dropout, rng),
      feed_forward_(shape.d_model, shape.ff_dim, rng),
      self_norm_(shape.d_model),
      cross_norm_(shape.d_model),
      feed_forward_norm_(shape.d_model) {}

Tensor DecoderLayer::forward(const Tensor& x, const Tensor& memory, const AttentionMask& self_mask,
                             const AttentionMask& memory_mask, const ForwardContext& ctx) const {
  Tensor h = self_norm_.forward(
      ad::add(x, dropout(self_attention_.forward(x, x, self_mask, ctx), dropout_, ctx)));
  h = cross_norm_.forward(
      ad::add(h, dropout(cross_attention_.forward(h, memory, memory_mask, ctx), dropout_, ctx)));
  return feed_forward_norm_.forward(ad::add(h, dropout(feed_forward_.forward(h), dropout_, ctx)));
}

void DecoderLayer::collect_parameters(const std::string& prefix, ad::ParameterList& out) const {
  self_attention_.collect_parameters(prefix + ".self_attention", out);
  cross_attention_.collect_parameters(prefix + ".cross_attention", out);
  feed_forward_.collect_parameters(prefix + ".feed_forward", out);
  self_norm_.collect_parameters(prefix + ".self_norm", out);
  cross_norm_.collect_parameters(prefix + ".cross_norm", out);
  feed_forward_norm_.collect_parameters(prefix + ".feed_forward_norm", out);
}

}  // namespace cwgan::inline CWGAN_PRECISION_NS::nn
