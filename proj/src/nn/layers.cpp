#include "cwgan/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace cwgan::inline CWGAN_PRECISION_NS::nn {

namespace {

Tensor init_tensor(ad::Shape shape, Init init, Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  std::vector<Scalar> values(ad::numel(shape), Scalar(0));
  if (init == Init::xavier_uniform) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : values) v = static_cast<Scalar>(dist(rng));
  } else if (init == Init::small_normal) {
    std::normal_distribution<double> dist(0.0, 0.02);
    for (auto& v : values) v = static_cast<Scalar>(dist(rng));
  }
  return Tensor::from(std::move(shape), std::move(values), true);
}

}  // namespace

LinearLayer::LinearLayer(std::size_t in_dim, std::size_t out_dim, Activation activation, Rng& rng,
                         Init init)
    : weight_(init_tensor({in_dim, out_dim}, init, rng, in_dim, out_dim)),
      bias_(Tensor::zeros({out_dim}, true)),
      activation_(activation) {
  if (in_dim == 0 || out_dim == 0) throw std::invalid_argument("LinearLayer: zero dimension");
}

LinearLayer::LinearLayer(Tensor weight, Tensor bias, Activation activation)
    : weight_(std::move(weight)), bias_(std::move(bias)), activation_(activation) {
  if (weight_.rank() != 2 || bias_.rank() != 1 || bias_.dim(0) != weight_.dim(1)) {
    throw ad::ShapeError("LinearLayer: weight " + ad::to_string(weight_.shape()) +
                         " inconsistent with bias " + ad::to_string(bias_.shape()));
  }
}

Tensor LinearLayer::forward(const Tensor& x) const {
  if (x.rank() == 0 || x.dim(-1) != in_dim()) {
    throw ad::ShapeError("linear: input " + ad::to_string(x.shape()) + " does not end in " +
                         std::to_string(in_dim()));
  }
  Tensor y = ad::add(ad::matmul(x.rank() == 1 ? ad::reshape(x, {1, in_dim()}) : x, weight_), bias_);
  if (x.rank() == 1) y = ad::reshape(y, {out_dim()});
  switch (activation_) {
    case Activation::relu:
      return ad::relu(y);
    case Activation::tanh:
      return ad::tanh(y);
    case Activation::identity:
      break;
  }
  return y;
}

void LinearLayer::collect_parameters(const std::string& prefix, ad::ParameterList& out) const {
  out.push_back({prefix + ".weight", weight_});
  out.push_back({prefix + ".bias", bias_});
}

LayerNorm::LayerNorm(std::size_t width)
    : gain_(Tensor::full({width}, Scalar(1), true)), shift_(Tensor::zeros({width}, true)) {}

Tensor LayerNorm::forward(const Tensor& x) const {
  return ad::add(ad::mul(ad::layer_norm_core(x, kEpsilon), gain_), shift_);
}

void LayerNorm::collect_parameters(const std::string& prefix, ad::ParameterList& out) const {
  out.push_back({prefix + ".gain", gain_});
  out.push_back({prefix + ".shift", shift_});
}

PositionalEncodingTable::PositionalEncodingTable(std::size_t max_len, std::size_t d_model)
    : max_len_(max_len), d_model_(d_model) {
  if (max_len == 0) throw std::invalid_argument("positional encoding: max_len must be >= 1");
  if (d_model == 0 || d_model % 2 != 0) {
    throw std::invalid_argument("positional encoding: d_model must be even and positive, got " +
                                std::to_string(d_model));
  }
  std::vector<Scalar> values(max_len * d_model);
  for (std::size_t pos = 0; pos < max_len; ++pos) {
    for (std::size_t i = 0; 2 * i < d_model; ++i) {
      const double exponent = static_cast<double>(2 * i) / static_cast<double>(d_model);
      const double angle = static_cast<double>(pos) / std::pow(10000.0, exponent);
      values[pos * d_model + 2 * i] = static_cast<Scalar>(std::sin(angle));
      values[pos * d_model + 2 * i + 1] = static_cast<Scalar>(std::cos(angle));
    }
  }
  table_ = Tensor::from({max_len, d_model}, std::move(values));
}

Tensor PositionalEncodingTable::rows(std::size_t length) const {
  if (length > max_len_) {
    throw ad::ShapeError("positional encoding: length " + std::to_string(length) +
                         " exceeds max_len " + std::to_string(max_len_));
  }
  return ad::slice(table_, 0, 0, length);
}

PositionalEncodingTable positional_encoding(std::size_t max_len, std::size_t d_model) {
  return PositionalEncodingTable(max_len, d_model);
}

Tensor dropout(const Tensor& x, double rate, bool training, Rng* rng) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout rate must be in [0, 1)");
  if (!training || rate == 0.0) return x;
  if (rng == nullptr) throw std::invalid_argument("dropout: training mode needs an rng");
  std::bernoulli_distribution keep(1.0 - rate);
  const Scalar kept = static_cast<Scalar>(1.0 / (1.0 - rate));
  std::vector<Scalar> mask(x.numel());
  for (auto& m : mask) m = keep(*rng) ? kept : Scalar(0);
  return ad::mul(x, Tensor::from(x.shape(), std::move(mask)));
}

Tensor dropout(const Tensor& x, double rate, const ForwardContext& ctx) {
  return dropout(x, rate, ctx.training, ctx.rng);
}

InputEmbedding::InputEmbedding(std::size_t vocab_size, std::size_t embed_dim, std::size_t d_model,
                               std::size_t max_len, PositionalCombine combine, double dropout,
                               Rng& rng)
    : combine_(combine), dropout_(dropout) {
  if (vocab_size == 0 || embed_dim == 0 || d_model == 0) {
    throw std::invalid_argument("InputEmbedding: dimensions must be positive");
  }
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<Scalar> values(vocab_size * embed_dim);
  for (auto& v : values) v = static_cast<Scalar>(dist(rng));
  table_ = Tensor::from({vocab_size, embed_dim}, std::move(values), true);
  if (combine == PositionalCombine::add) {
    projection_ = LinearLayer(embed_dim, d_model, Activation::identity, rng);
    positional_ = PositionalEncodingTable(max_len, d_model);
  } else {
    if (d_model % 4 != 0) {
      throw std::invalid_argument("positional concat needs d_model divisible by 4");
    }
    projection_ = LinearLayer(embed_dim, d_model / 2, Activation::identity, rng);
    positional_ = PositionalEncodingTable(max_len, d_model / 2);
  }
}

Tensor InputEmbedding::lookup(std::span<const std::int32_t> ids, std::size_t batch,
                              std::size_t length) const {
  return ad::embedding(table_, ids, {batch, length});
}

Tensor InputEmbedding::mix(const Tensor& rows) const {
  if (rows.rank() == 0 || rows.dim(-1) != vocab_size()) {
    throw ad::ShapeError("embedding mixture: rows " + ad::to_string(rows.shape()) +
                         " do not end in vocab size " + std::to_string(vocab_size()));
  }
  return ad::matmul(rows, table_);
}

Tensor InputEmbedding::finish(const Tensor& features, const ForwardContext& ctx) const {
  if (features.rank() != 3) {
    throw ad::ShapeError("input embedding: expected [batch, length, width], got " +
                         ad::to_string(features.shape()));
  }
  const std::size_t batch = features.dim(0);
  const std::size_t length = features.dim(1);
  Tensor projected = projection_.forward(features);
  Tensor pe = positional_.rows(length);
  Tensor combined;
  if (combine_ == PositionalCombine::add) {
    combined = ad::add(projected, pe);
  } else {
    std::vector<Scalar> tiled;
    tiled.reserve(batch * pe.numel());
    for (std::size_t b = 0; b < batch; ++b) tiled.insert(tiled.end(), pe.data().begin(), pe.data().end());
    const Tensor parts[] = {projected, Tensor::from({batch, length, pe.dim(1)}, std::move(tiled))};
    combined = ad::concat(parts, -1);
  }
  return dropout(combined, dropout_, ctx);
}

Tensor InputEmbedding::forward(std::span<const std::int32_t> ids, std::size_t batch,
                               std::size_t length, const ForwardContext& ctx) const {
  return finish(lookup(ids, batch, length), ctx);
}

void InputEmbedding::collect_parameters(const std::string& prefix, ad::ParameterList& out) const {
  out.push_back({prefix + ".token_embedding", table_});
  projection_.collect_parameters(prefix + ".projection", out);
}

}  // namespace cwgan::inline CWGAN_PRECISION_NS::nn
