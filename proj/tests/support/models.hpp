#pragma once

// Small model configurations shared by tests.

#include "cwgan/model/critic.hpp"
#include "cwgan/model/generator.hpp"

namespace cwgan::inline CWGAN_PRECISION_NS::testkit {

inline GeneratorConfig tiny_generator(std::size_t vocab = 12, std::size_t max_len = 6) {
  GeneratorConfig g;
  g.vocab_size = vocab;
  g.n_layers = 1;
  g.n_heads = 2;
  g.d_model = 8;
  g.embed_dim = 6;
  g.ff_dim = 12;
  g.max_len = max_len;
  g.dropout = 0.0;
  return g;
}

inline CriticConfig tiny_critic() {
  CriticConfig c;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_model = 8;
  c.embed_dim = 6;
  c.ff_dim = 12;
  c.dropout = 0.0;
  return c;
}

/// Overwrites every parameter whose name contains `needle` with uniform values.
inline void randomize(const ad::ParameterList& params, const std::string& needle, std::mt19937_64& rng,
                      double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  for (const auto& p : params) {
    if (p.name.find(needle) == std::string::npos) continue;
    ad::Tensor t = p.tensor;
    for (auto& v : t.data()) v = static_cast<Scalar>(d(rng));
  }
}

inline text::TokenMatrix wrapped(const std::vector<std::vector<text::TokenId>>& rows, std::size_t max_len) {
  std::vector<std::vector<text::TokenId>> out;
  for (const auto& r : rows) out.push_back(text::wrap_sequence(r, max_len).ids);
  return text::TokenMatrix::from_rows(out, max_len);
}

}  // namespace cwgan::inline CWGAN_PRECISION_NS::testkit
