#include "cwgan/nn/attention.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

namespace cwgan::inline CWGAN_PRECISION_NS::nn {

AttentionMask AttentionMask::all(std::size_t batch, std::size_t query_len, std::size_t key_len) {
  AttentionMask mask;
  mask.kind = MaskKind::none;
  mask.batch = batch;
  mask.query_len = query_len;
  mask.key_len = key_len;
  mask.allowed.assign(batch * query_len * key_len, 1);
  return mask;
}

AttentionMask AttentionMask::padding(std::span<const std::int32_t> key_ids, std::size_t batch,
                                     std::size_t key_len, std::size_t query_len,
                                     std::int32_t pad_id) {
  if (key_ids.size() != batch * key_len) {
    throw ad::ShapeError("padding mask: " + std::to_string(key_ids.size()) + " ids for [" +
                         std::to_string(batch) + ", " + std::to_string(key_len) + "]");
  }
  AttentionMask mask = all(batch, query_len, key_len);
  mask.kind = MaskKind::padding;
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t k = 0; k < key_len; ++k)
      if (key_ids[b * key_len + k] == pad_id)
        for (std::size_t q = 0; q < query_len; ++q) mask.allowed[(b * query_len + q) * key_len + k] = 0;
  return mask;
}

AttentionMask AttentionMask::causal(std::size_t batch, std::size_t length) {
  AttentionMask mask = all(batch, length, length);
  mask.kind = MaskKind::causal;
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t q = 0; q < length; ++q)
      for (std::size_t k = q + 1; k < length; ++k) mask.allowed[(b * length + q) * length + k] = 0;
  return mask;
}

AttentionMask AttentionMask::combine(const AttentionMask& a, const AttentionMask& b) {
  if (a.batch != b.batch || a.query_len != b.query_len || a.key_len != b.key_len) {
    throw ad::ShapeError("mask combine: dimension mismatch");
  }
  AttentionMask out = a;
  out.kind = MaskKind::combined;
  for (std::size_t i = 0; i < out.allowed.size(); ++i) out.allowed[i] = a.allowed[i] && b.allowed[i];
  return out;
}

Tensor mask_bias(const AttentionMask& mask, std::size_t heads) {
  const std::size_t q_len = mask.query_len;
  const std::size_t k_len = mask.key_len;
  std::vector<Scalar> bias(mask.batch * heads * q_len * k_len, Scalar(0));
  for (std::size_t b = 0; b < mask.batch; ++b) {
    for (std::size_t q = 0; q < q_len; ++q) {
      const std::uint8_t* row = mask.allowed.data() + (b * q_len + q) * k_len;
      bool any = false;
      for (std::size_t k = 0; k < k_len; ++k) any = any || row[k];
      for (std::size_t h = 0; h < heads; ++h) {
        Scalar* out = bias.data() + ((b * heads + h) * q_len + q) * k_len;
        for (std::size_t k = 0; k < k_len; ++k) out[k] = row[k] ? Scalar(0) : kMaskedLogit;
        if (!any) out[0] = Scalar(0);
      }
#ifndef NDEBUG
      if (!any) std::cerr << "attention: fully masked row (batch " << b << ", query " << q
                          << ") redirected to key 0\n";
#endif
    }
  }
  return Tensor::from({mask.batch, heads, q_len, k_len}, std::move(bias));
}

Tensor scaled_dot_product_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                    const Tensor& bias, double dropout_rate,
                                    const ForwardContext& ctx, Tensor* weights_out) {
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(q.dim(-1)));
  Tensor scores = ad::scale(ad::matmul(q, ad::transpose(k)), scale);
  if (bias.defined()) scores = ad::add(scores, bias);
  Tensor weights = ad::softmax(scores);
  if (weights_out) *weights_out = weights;
  return ad::matmul(dropout(weights, dropout_rate, ctx), v);
}

MultiHeadAttention::MultiHeadAttention(std::size_t d_model, std::size_t n_heads, double dropout_rate,
                                       Rng& rng)
    : d_model_(d_model), n_heads_(n_heads), dropout_rate_(dropout_rate) {
  if (n_heads == 0 || d_model % n_heads != 0) {
    throw std::invalid_argument("attention: d_model " + std::to_string(d_model) +
                                " not divisible by " + std::to_string(n_heads) + " heads");
  }
  query_ = LinearLayer(d_model, d_model, Activation::identity, rng);
  key_ = LinearLayer(d_model, d_model, Activation::identity, rng);
  value_ = LinearLayer(d_model, d_model, Activation::identity, rng);
  output_ = LinearLayer(d_model, d_model, Activation::identity, rng);
}

MultiHeadAttention::MultiHeadAttention(LinearLayer query, LinearLayer key, LinearLayer value,
                                       LinearLayer output, std::size_t n_heads, double dropout_rate)
    : d_model_(query.in_dim()),
      n_heads_(n_heads),
      dropout_rate_(dropout_rate),
      query_(std::move(query)),
      key_(std::move(key)),
      value_(std::move(value)),
      output_(std::move(output)) {
  if (n_heads == 0 || d_model_ % n_heads != 0) {
    throw std::invalid_argument("attention: d_model not divisible by heads");
  }
}

Tensor MultiHeadAttention::split_heads(const Tensor& x) const {
  const std::size_t batch = x.dim(0);
  const std::size_t len = x.dim(1);
  return ad::transpose(ad::reshape(x, {batch, len, n_heads_, head_dim()}), 1, 2);
}

Tensor MultiHeadAttention::merge_heads(const Tensor& x) const {
  const std::size_t batch = x.dim(0);
  const std::size_t len = x.dim(2);
  return ad::reshape(ad::transpose(x, 1, 2), {batch, len, d_model_});
}

Tensor MultiHeadAttention::forward(const Tensor& query_input, const Tensor& memory,
                                   const AttentionMask& mask, const ForwardContext& ctx,
                                   Tensor* weights_out) const {
  if (query_input.rank() != 3 || memory.rank() != 3 || query_input.dim(-1) != d_model_ ||
      memory.dim(-1) != d_model_ || query_input.dim(0) != memory.dim(0)) {
    throw ad::ShapeError("attention: inputs " + ad::to_string(query_input.shape()) + " and " +
                         ad::to_string(memory.shape()) + " do not match d_model " +
                         std::to_string(d_model_));
  }
  if (mask.batch != query_input.dim(0) || mask.query_len != query_input.dim(1) ||
      mask.key_len != memory.dim(1)) {
    throw ad::ShapeError("attention: mask [" + std::to_string(mask.batch) + ", " +
                         std::to_string(mask.query_len) + ", " + std::to_string(mask.key_len) +
                         "] does not match inputs");
  }
  Tensor q = split_heads(query_.forward(query_input));
  Tensor k = split_heads(key_.forward(memory));
  Tensor v = split_heads(value_.forward(memory));
  Tensor context = scaled_dot_product_attention(q, k, v, mask_bias(mask, n_heads_), dropout_rate_,
                                                ctx, weights_out);
  return output_.forward(merge_heads(context));
}

void MultiHeadAttention::collect_parameters(const std::string& prefix, ad::ParameterList& out) const {
  query_.collect_parameters(prefix + ".query", out);
  key_.collect_parameters(prefix + ".key", out);
  value_.collect_parameters(prefix + ".value", out);
  output_.collect_parameters(prefix + ".output", out);
}

}  // namespace cwgan::inline CWGAN_PRECISION_NS::nn
