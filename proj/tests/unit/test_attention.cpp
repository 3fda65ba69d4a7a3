#include <doctest.h>

#include <cmath>
#include <random>

#include "cwgan/nn/transformer.hpp"
#include "support/fd.hpp"

using namespace cwgan;
using namespace cwgan::nn;

TEST_CASE("mask constructors") {
  const auto causal = AttentionMask::causal(1, 3);
  CHECK(causal.at(0, 0, 0));
  CHECK_FALSE(causal.at(0, 0, 1));
  CHECK(causal.at(0, 2, 1));
  const std::int32_t keys[] = {5, 0, 7, 0};
  const auto pad = AttentionMask::padding(keys, 2, 2, 3, 0);
  CHECK(pad.at(0, 2, 0));
  CHECK_FALSE(pad.at(0, 1, 1));
  CHECK_FALSE(pad.at(1, 0, 1));
  const auto both = AttentionMask::combine(AttentionMask::causal(2, 2), AttentionMask::padding(keys, 2, 2, 2, 0));
  CHECK_FALSE(both.at(0, 1, 1));
  CHECK(both.at(1, 1, 0));
  CHECK_THROWS(AttentionMask::combine(AttentionMask::causal(1, 2), AttentionMask::causal(1, 3)));
}

TEST_CASE("attention with one key copies its value") {
  const Tensor q = Tensor::from({1, 1, 1, 2}, {1, 0});
  const Tensor k = Tensor::from({1, 1, 2, 2}, {1, 0, 0, 1});
  const Tensor v = Tensor::from({1, 1, 2, 2}, {3, 4, 5, 6});
  AttentionMask m = AttentionMask::all(1, 1, 2);
  m.allowed[1] = 0;
  const Tensor out = scaled_dot_product_attention(q, k, v, mask_bias(m, 1), 0.0, {});
  CHECK(out.data()[0] == doctest::Approx(3));
  CHECK(out.data()[1] == doctest::Approx(4));
}

TEST_CASE("attention weights follow softmax of scaled scores") {
  const Tensor q = Tensor::from({1, 1, 1, 4}, {1, 1, 1, 1});
  const Tensor k = Tensor::from({1, 1, 2, 4}, {1, 0, 0, 0, 0, 0, 0, 0});
  const Tensor v = Tensor::from({1, 1, 2, 1}, {1, 0});
  Tensor w;
  scaled_dot_product_attention(q, k, v, mask_bias(AttentionMask::all(1, 1, 2), 1), 0.0, {}, &w);
  const double e = std::exp(1.0 / 2.0);
  CHECK(w.data()[0] == doctest::Approx(e / (e + 1)));
}

TEST_CASE("rows with no visible key do not produce NaN") {
  AttentionMask m = AttentionMask::all(1, 1, 2);
  m.allowed = {0, 0};
  const Tensor x = Tensor::from({1, 1, 2, 2}, {1, 2, 3, 4});
  const Tensor out = scaled_dot_product_attention(ad::slice(x, 2, 0, 1), x, x, mask_bias(m, 1), 0.0, {});
  for (auto v : out.data()) CHECK(std::isfinite(v));
}

TEST_CASE("causal decoder output ignores future inputs") {
  Rng rng(8);
  const DecoderLayer layer({8, 2, 16, 0.0}, rng);
  std::mt19937_64 g(5);
  Tensor x = testkit::random_tensor({1, 4, 8}, g, -1, 1, false);
  const Tensor mem = testkit::random_tensor({1, 3, 8}, g, -1, 1, false);
  const auto self = AttentionMask::causal(1, 4);
  const auto cross = AttentionMask::all(1, 4, 3);
  const Tensor before = layer.forward(x, mem, self, cross, {}).clone();
  for (std::size_t d = 0; d < 8; ++d) x.data()[3 * 8 + d] += 5;
  const Tensor after = layer.forward(x, mem, self, cross, {});
  for (std::size_t i = 0; i < 3 * 8; ++i) CHECK(before.data()[i] == after.data()[i]);
  CHECK(before.data()[3 * 8] != after.data()[3 * 8]);
}

TEST_CASE("multi-head attention shape checks and parameters") {
  Rng rng(1);
  const MultiHeadAttention mha(8, 2, 0.0, rng);
  CHECK(mha.head_dim() == 4);
  ad::ParameterList params;
  mha.collect_parameters("a", params);
  CHECK(params.size() == 8);
  CHECK_THROWS(MultiHeadAttention(8, 3, 0.0, rng));
  const Tensor x = Tensor::zeros({2, 3, 8});
  CHECK(mha.forward(x, x, AttentionMask::all(2, 3, 3), {}).shape() == ad::Shape{2, 3, 8});
  CHECK_THROWS(mha.forward(x, x, AttentionMask::all(2, 2, 3), {}));
}

TEST_CASE("encoder layer ignores padded keys") {
  Rng rng(3);
  const EncoderLayer layer({8, 2, 16, 0.0}, rng);
  std::mt19937_64 g(6);
  Tensor x = testkit::random_tensor({1, 3, 8}, g, -1, 1, false);
  const std::int32_t ids[] = {5, 6, 0};
  const auto mask = AttentionMask::padding(ids, 1, 3, 3, 0);
  const Tensor a = layer.forward(x, mask, {}).clone();
  for (std::size_t d = 0; d < 8; ++d) x.data()[2 * 8 + d] = 9;
  const Tensor b = layer.forward(x, mask, {});
  for (std::size_t i = 0; i < 16; ++i) CHECK(a.data()[i] == doctest::Approx(b.data()[i]));
}
