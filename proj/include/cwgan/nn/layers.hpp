#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>

#include "cwgan/ad/ops.hpp"
#include "cwgan/config.hpp"
#include "cwgan/ad/optimizer.hpp"

namespace cwgan::inline CWGAN_PRECISION_NS::nn {

using ad::Tensor;
using Rng = std::mt19937_64;

/// Per-call forward settings. Inference passes the default (no dropout, no rng).
struct ForwardContext {
  bool training = false;
  Rng* rng = nullptr;
};

enum class Activation { identity, relu, tanh };

enum class Init { xavier_uniform, small_normal, zeros };

/// y = activation(x W + b), applied over the last axis.
class LinearLayer {
 public:
  LinearLayer() = default;
  LinearLayer(std::size_t in_dim, std::size_t out_dim, Activation activation, Rng& rng,
              Init init = Init::xavier_uniform);
  /// Wraps existing tensors (weight [in, out], bias [out]).
  LinearLayer(Tensor weight, Tensor bias, Activation activation);

  Tensor forward(const Tensor& x) const;

  std::size_t in_dim() const { return weight_.dim(0); }
  std::size_t out_dim() const { return weight_.dim(1); }
  Activation activation() const { return activation_; }
  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }

  void collect_parameters(const std::string& prefix, ad::ParameterList& out) const;

 private:
  Tensor weight_;
  Tensor bias_;
  Activation activation_ = Activation::identity;
};

/// Affine layer normalization over the last axis (epsilon 1e-5).
class LayerNorm {
 public:
  static constexpr Scalar kEpsilon = Scalar(1e-5);

  LayerNorm() = default;
  explicit LayerNorm(std::size_t width);

  Tensor forward(const Tensor& x) const;
  void collect_parameters(const std::string& prefix, ad::ParameterList& out) const;

 private:
  Tensor gain_;
  Tensor shift_;
};

/// Precomputed sinusoidal table: even columns sin(pos / 10000^(2i/d)),
/// odd columns cos of the same angle.
class PositionalEncodingTable {
 public:
  PositionalEncodingTable() = default;
  PositionalEncodingTable(std::size_t max_len, std::size_t d_model);

  std::size_t max_len() const { return max_len_; }
  std::size_t d_model() const { return d_model_; }
  const Tensor& table() const { return table_; }
  /// First `length` rows, shape [length, d_model].
  Tensor rows(std::size_t length) const;

 private:
  std::size_t max_len_ = 0;
  std::size_t d_model_ = 0;
  Tensor table_;
};

PositionalEncodingTable positional_encoding(std::size_t max_len, std::size_t d_model);

/// Inverted dropout. Identity when not training or when rate is 0.
Tensor dropout(const Tensor& x, double rate, bool training, Rng* rng);
Tensor dropout(const Tensor& x, double rate, const ForwardContext& ctx);


/// Token table -> linear projection -> positional encoding -> dropout.
///
/// In `concat` mode the projection and the positional table each take half
/// of d_model and are concatenated along the feature axis.
class InputEmbedding {
 public:
  InputEmbedding() = default;
  InputEmbedding(std::size_t vocab_size, std::size_t embed_dim, std::size_t d_model,
                 std::size_t max_len, PositionalCombine combine, double dropout, Rng& rng);

  /// Table lookup, shape [batch, length, embed_dim].
  Tensor lookup(std::span<const std::int32_t> ids, std::size_t batch, std::size_t length) const;
  /// Probability-weighted mixture of table rows: rows [..., vocab] -> [..., embed_dim].
  Tensor mix(const Tensor& rows) const;
  /// Projection, positional encoding and dropout over [batch, length, embed_dim] features.
  Tensor finish(const Tensor& features, const ForwardContext& ctx) const;

  Tensor forward(std::span<const std::int32_t> ids, std::size_t batch, std::size_t length,
                 const ForwardContext& ctx) const;

  std::size_t vocab_size() const { return table_.dim(0); }
  std::size_t max_len() const { return positional_.max_len(); }
  const Tensor& table() const { return table_; }
  const LinearLayer& projection() const { return projection_; }

  void collect_parameters(const std::string& prefix, ad::ParameterList& out) const;

 private:
  Tensor table_;
  LinearLayer projection_;
  PositionalEncodingTable positional_;
  PositionalCombine combine_ = PositionalCombine::add;
  double dropout_ = 0.0;
};

}  // namespace cwgan::inline CWGAN_PRECISION_NS::nn
