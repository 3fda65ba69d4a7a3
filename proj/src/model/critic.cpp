#include "cwgan/model/critic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cwgan::inline CWGAN_PRECISION_NS::model {

std::vector<TokenId> strip_wrapping(std::span<const TokenId> row) {
  std::vector<TokenId> out;
  for (std::size_t i = 0; i < row.size(); ++i) {
    const TokenId id = row[i];
    if (i == 0 && id == text::kBos) continue;
    if (id == text::kEos || id == text::kPad) break;
    out.push_back(id);
  }
  return out;
}

namespace {

std::size_t pair_width(std::size_t max_len) { return 2 * max_len; }

// [BOS q SEP] prefix; returns the position where the answer starts.
std::size_t start_row(std::vector<TokenId>& row, std::span<const TokenId> question, std::size_t max_len) {
  std::vector<TokenId> q = strip_wrapping(question);
  if (q.size() > max_len - 2) q.resize(max_len - 2);
  row.push_back(text::kBos);
  row.insert(row.end(), q.begin(), q.end());
  row.push_back(text::kSep);
  return row.size();
}

}  // namespace

PairBatch make_real_pairs(const TokenMatrix& question, const TokenMatrix& answer, std::size_t max_len) {
  if (question.batch != answer.batch) throw std::invalid_argument("make_real_pairs: batch size mismatch");
  std::vector<std::vector<TokenId>> rows;
  PairBatch out;
  out.source = AnswerSource::real;
  for (std::size_t b = 0; b < question.batch; ++b) {
    std::vector<TokenId> row;
    out.answer_begin.push_back(start_row(row, question.row(b), max_len));
    std::vector<TokenId> a = strip_wrapping(answer.row(b));
    if (a.size() > max_len - 2) a.resize(max_len - 2);
    row.insert(row.end(), a.begin(), a.end());
    row.push_back(text::kEos);
    out.soft_count.push_back(0);
    rows.push_back(std::move(row));
  }
  out.tokens = TokenMatrix::from_rows(rows, pair_width(max_len));
  return out;
}

PairBatch make_fake_pairs(const TokenMatrix& question, const TokenMatrix& generated, std::size_t max_len,
                          const Tensor& rows_in) {
  if (question.batch != generated.batch) throw std::invalid_argument("make_fake_pairs: batch size mismatch");
  if (rows_in.defined() &&
      (rows_in.rank() != 3 || rows_in.dim(0) != generated.batch || rows_in.dim(1) != generated.length)) {
    throw ad::ShapeError("make_fake_pairs: soft rows " + ad::to_string(rows_in.shape()) +
                         " do not match generated tokens");
  }
  std::vector<std::vector<TokenId>> rows;
  PairBatch out;
  out.source = AnswerSource::generated;
  out.soft_rows = rows_in;
  for (std::size_t b = 0; b < question.batch; ++b) {
    std::vector<TokenId> row;
    out.answer_begin.push_back(start_row(row, question.row(b), max_len));
    const auto gen = generated.row(b);
    std::size_t n = 0;
    bool ended = false;
    while (n < gen.size() && n < max_len - 1) {
      const TokenId id = gen[n];
      if (id == text::kEos) {
        row.push_back(id);
        ++n;
        ended = true;
        break;
      }
      if (n == max_len - 2) break;  // answer budget used up; close below
      row.push_back(id);
      ++n;
    }
    if (!ended) row.push_back(text::kEos);
    out.soft_count.push_back(rows_in.defined() ? n : 0);
    rows.push_back(std::move(row));
  }
  out.tokens = TokenMatrix::from_rows(rows, pair_width(max_len));
  return out;
}

CriticModel::CriticModel(const CriticConfig& config, std::size_t vocab_size, std::size_t max_len, nn::Rng& rng)
    : config_(config), width_(pair_width(max_len)) {
  if (config.n_layers == 0) throw std::invalid_argument("critic: n_layers must be positive");
  if (max_len < 3) throw std::invalid_argument("critic: max_len must be at least 3");
  embedding_ = nn::InputEmbedding(vocab_size, config.embed_dim, config.d_model, width_,
                                  PositionalCombine::add, config.dropout, rng);
  const nn::BlockShape shape{config.d_model, config.n_heads, config.ff_dim, config.dropout};
  for (std::size_t i = 0; i < config.n_layers; ++i) encoder_.emplace_back(shape, rng);
  score_head_ = nn::LinearLayer(config.d_model, 1, nn::Activation::identity, rng, nn::Init::zeros);
}

void CriticModel::validate(const PairBatch& pairs) const {
  const TokenMatrix& m = pairs.tokens;
  if (m.batch == 0) throw std::invalid_argument("critic: empty pair batch");
  if (m.length != width_ || m.ids.size() != m.batch * m.length) {
    throw ad::ShapeError("critic: pair width " + std::to_string(m.length) + ", expected " + std::to_string(width_));
  }
  if (pairs.answer_begin.size() != m.batch || pairs.soft_count.size() != m.batch) {
    throw std::invalid_argument("critic: pair batch bookkeeping does not match its size");
  }
  for (std::size_t b = 0; b < m.batch; ++b) {
    const auto row = m.row(b);
    if (row[0] != text::kBos) throw std::invalid_argument("critic: pair " + std::to_string(b) + " does not start with BOS");
    const auto seps = std::count(row.begin(), row.end(), text::kSep);
    if (seps != 1) {
      throw std::invalid_argument("critic: pair " + std::to_string(b) + " has " + std::to_string(seps) +
                                  " separators, expected exactly one");
    }
    const auto sep_at = static_cast<std::size_t>(std::find(row.begin(), row.end(), text::kSep) - row.begin());
    if (pairs.answer_begin[b] != sep_at + 1) throw std::invalid_argument("critic: answer does not follow the separator");
    for (TokenId id : row) {
      if (id < 0 || static_cast<std::size_t>(id) >= vocab_size()) {
        throw std::out_of_range("critic: token " + std::to_string(id) + " outside vocabulary");
      }
    }
  }
  if (!pairs.has_soft_rows()) return;
  const Tensor& rows = pairs.soft_rows;
  if (rows.rank() != 3 || rows.dim(0) != m.batch || rows.dim(2) != vocab_size()) {
    throw ad::ShapeError("critic: soft rows " + ad::to_string(rows.shape()) + " do not match the batch");
  }
  const std::size_t vocab = vocab_size();
  const auto data = rows.data();
  for (std::size_t b = 0; b < m.batch; ++b) {
    if (pairs.soft_count[b] > rows.dim(1) || pairs.answer_begin[b] + pairs.soft_count[b] > width_) {
      throw std::invalid_argument("critic: soft row count exceeds the answer span");
    }
    for (std::size_t t = 0; t < pairs.soft_count[b]; ++t) {
      const Scalar* r = data.data() + (b * rows.dim(1) + t) * vocab;
      double total = 0;
      for (std::size_t v = 0; v < vocab; ++v) {
        if (!(r[v] >= 0)) throw std::invalid_argument("critic: soft row has a negative or NaN entry");
        total += r[v];
      }
      if (std::abs(total - 1.0) > 1e-3) {
        throw std::invalid_argument("critic: soft row sums to " + std::to_string(total) + ", not 1");
      }
    }
  }
}

Tensor CriticModel::embed(const PairBatch& pairs, const ForwardContext& ctx) const {
  const TokenMatrix& m = pairs.tokens;
  if (!pairs.has_soft_rows()) return embedding_.forward(m.ids, m.batch, m.length, ctx);

  std::vector<Tensor> per_row;
  per_row.reserve(m.batch);
  for (std::size_t b = 0; b < m.batch; ++b) {
    const auto row = m.row(b);
    const std::size_t begin = pairs.answer_begin[b];
    const std::size_t count = pairs.soft_count[b];
    std::vector<Tensor> parts;
    parts.push_back(embedding_.lookup(row.subspan(0, begin), 1, begin));
    if (count > 0) {
      const Tensor soft = ad::slice(ad::slice(pairs.soft_rows, 0, b, b + 1), 1, 0, count);
      parts.push_back(embedding_.mix(soft));
    }
    const std::size_t rest = width_ - begin - count;
    if (rest > 0) parts.push_back(embedding_.lookup(row.subspan(begin + count), 1, rest));
    per_row.push_back(ad::concat(parts, 1));
  }
  return embedding_.finish(ad::concat(per_row, 0), ctx);
}

Tensor CriticModel::score(const PairBatch& pairs, const ForwardContext& ctx) const {
  validate(pairs);
  const TokenMatrix& m = pairs.tokens;
  Tensor x = embed(pairs, ctx);
  const nn::AttentionMask mask = nn::AttentionMask::padding(m.ids, m.batch, m.length, m.length, text::kPad);
  for (const auto& layer : encoder_) x = layer.forward(x, mask, ctx);

  Tensor pooled;
  if (config_.pooling == CriticPooling::first_token) {
    pooled = ad::slice(x, 1, 0, 1);
  } else {
    std::vector<Scalar> weights(m.batch * m.length, Scalar(0));
    for (std::size_t b = 0; b < m.batch; ++b) {
      const auto row = m.row(b);
      const auto count = static_cast<std::size_t>(std::count_if(row.begin(), row.end(), [](TokenId id) { return id != text::kPad; }));
      for (std::size_t t = 0; t < m.length; ++t)
        if (row[t] != text::kPad) weights[b * m.length + t] = Scalar(1) / static_cast<Scalar>(count);
    }
    pooled = ad::matmul(Tensor::from({m.batch, 1, m.length}, std::move(weights)), x);
  }
  pooled = ad::reshape(pooled, {m.batch, config_.d_model});
  return ad::reshape(score_head_.forward(pooled), {m.batch});
}

ad::ParameterList CriticModel::parameters() const {
  ad::ParameterList out;
  embedding_.collect_parameters("embedding", out);
  for (std::size_t i = 0; i < encoder_.size(); ++i) encoder_[i].collect_parameters("encoder." + std::to_string(i), out);
  score_head_.collect_parameters("score_head", out);
  return out;
}

void CriticModel::clip_weights(double c) const {
  if (!(c > 0)) throw std::invalid_argument("clip_weights: c must be positive");
  const auto bound = static_cast<Scalar>(c);
  for (const auto& p : parameters()) {
    Tensor t = p.tensor;
    for (Scalar& v : t.data()) v = std::clamp(v, -bound, bound);
  }
}

double CriticModel::max_abs_weight() const {
  double worst = 0;
  for (const auto& p : parameters())
    for (Scalar v : p.tensor.data()) worst = std::max(worst, static_cast<double>(std::abs(v)));
  return worst;
}

Tensor critic_loss(const CriticModel& critic, const PairBatch& real, const PairBatch& fake,
                   const ForwardContext& ctx) {
  if (real.size() == 0 || fake.size() == 0) throw std::invalid_argument("critic_loss: empty batch");
  if (real.size() != fake.size()) {
    throw std::invalid_argument("critic_loss: " + std::to_string(real.size()) + " real pairs vs " +
                                std::to_string(fake.size()) + " fake pairs");
  }
  return ad::sub(ad::mean(critic.score(fake, ctx)), ad::mean(critic.score(real, ctx)));
}

Tensor generator_adv_loss(const CriticModel& critic, const PairBatch& fake, const ForwardContext& ctx) {
  if (fake.size() == 0) throw std::invalid_argument("generator_adv_loss: empty batch");
  if (!fake.has_soft_rows()) {
    throw std::invalid_argument("generator_adv_loss: fake pairs carry no soft rows, so no gradient could reach the generator");
  }
  FreezeGuard frozen(critic.parameters());
  return ad::neg(ad::mean(critic.score(fake, ctx)));
}

FreezeGuard::FreezeGuard(ad::ParameterList params) : params_(std::move(params)) {
  for (auto& p : params_) {
    previous_.push_back(p.tensor.requires_grad());
    p.tensor.set_requires_grad(false);
  }
}

FreezeGuard::~FreezeGuard() {
  for (std::size_t i = 0; i < params_.size(); ++i) params_[i].tensor.set_requires_grad(previous_[i]);
}

Tensor vanilla_discriminator_loss(const Tensor& real_scores, const Tensor& fake_scores) {
  return ad::neg(ad::add(ad::mean(ad::log_sigmoid(real_scores)), ad::mean(ad::log_sigmoid(ad::neg(fake_scores)))));
}

Tensor vanilla_generator_loss(const Tensor& fake_scores) {
  return ad::mean(ad::log_sigmoid(ad::neg(fake_scores)));
}

}  // namespace cwgan::inline CWGAN_PRECISION_NS::model
