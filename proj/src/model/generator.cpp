#include "cwgan/model/generator.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace cwgan::inline CWGAN_PRECISION_NS::model {

namespace {

nn::AttentionMask key_padding(const TokenMatrix& keys, std::size_t query_len) {
  return nn::AttentionMask::padding(keys.ids, keys.batch, keys.length, query_len, text::kPad);
}

}  // namespace

GeneratorModel::GeneratorModel(const GeneratorConfig& config, nn::Rng& rng) : config_(config) {
  if (config.vocab_size <= static_cast<std::size_t>(text::kReservedCount)) {
    throw std::invalid_argument("generator: vocab_size " + std::to_string(config.vocab_size) +
                                " leaves no room beside the reserved tokens");
  }
  if (config.n_layers == 0 || config.max_len == 0 || config.gumbel_temperature <= 0) {
    throw std::invalid_argument("generator: n_layers, max_len and temperature must be positive");
  }
  embedding_ = nn::InputEmbedding(config.vocab_size, config.embed_dim, config.d_model, config.max_len,
                                  config.positional_combine, config.dropout, rng);
  const nn::BlockShape shape{config.d_model, config.n_heads, config.ff_dim, config.dropout};
  for (std::size_t i = 0; i < config.n_layers; ++i) encoder_.emplace_back(shape, rng);
  for (std::size_t i = 0; i < config.n_layers; ++i) decoder_.emplace_back(shape, rng);
  output_head_ = nn::LinearLayer(config.d_model, config.vocab_size, nn::Activation::identity, rng,
                                 nn::Init::small_normal);
}

void GeneratorModel::check_tokens(const TokenMatrix& m, const char* what, bool reject_empty_rows) const {
  if (m.batch == 0 || m.length == 0 || m.ids.size() != m.batch * m.length) {
    throw ad::ShapeError(std::string("generator: malformed ") + what + " matrix");
  }
  if (m.length > config_.max_len) {
    throw ad::ShapeError(std::string("generator: ") + what + " length " + std::to_string(m.length) +
                         " exceeds max_len " + std::to_string(config_.max_len));
  }
  for (TokenId id : m.ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= config_.vocab_size) {
      throw std::out_of_range(std::string("generator: ") + what + " token " + std::to_string(id) +
                              " outside vocabulary of " + std::to_string(config_.vocab_size));
    }
  }
  if (!reject_empty_rows) return;
  for (std::size_t b = 0; b < m.batch; ++b) {
    bool any = false;
    for (TokenId id : m.row(b)) any = any || id != text::kPad;
    if (!any) throw std::invalid_argument(std::string("generator: empty ") + what + " in row " + std::to_string(b));
  }
}

Tensor GeneratorModel::encode(const TokenMatrix& question, const ForwardContext& ctx) const {
  check_tokens(question, "question", true);
  Tensor x = embedding_.forward(question.ids, question.batch, question.length, ctx);
  const nn::AttentionMask mask = key_padding(question, question.length);
  for (const auto& layer : encoder_) x = layer.forward(x, mask, ctx);
  return x;
}

Tensor GeneratorModel::decode(const Tensor& memory, const TokenMatrix& question,
                              const TokenMatrix& answer_in, const ForwardContext& ctx) const {
  check_tokens(answer_in, "answer", false);
  if (answer_in.batch != question.batch) {
    throw ad::ShapeError("generator: " + std::to_string(answer_in.batch) + " answers for " +
                         std::to_string(question.batch) + " questions");
  }
  Tensor x = embedding_.forward(answer_in.ids, answer_in.batch, answer_in.length, ctx);
  const nn::AttentionMask self_mask = nn::AttentionMask::causal(answer_in.batch, answer_in.length);
  const nn::AttentionMask memory_mask = key_padding(question, answer_in.length);
  for (const auto& layer : decoder_) x = layer.forward(x, memory, self_mask, memory_mask, ctx);
  return x;
}

Tensor GeneratorModel::teacher_forced_logits(const TokenMatrix& question, const TokenMatrix& answer_in,
                                             const ForwardContext& ctx) const {
  if (answer_in.length != question.length) {
    throw ad::ShapeError("generator: answer length " + std::to_string(answer_in.length) +
                         " differs from question length " + std::to_string(question.length));
  }
  const Tensor memory = encode(question, ctx);
  return output_head_.forward(decode(memory, question, answer_in, ctx));
}

ad::ParameterList GeneratorModel::parameters() const {
  ad::ParameterList out;
  embedding_.collect_parameters("embedding", out);
  for (std::size_t i = 0; i < encoder_.size(); ++i) encoder_[i].collect_parameters("encoder." + std::to_string(i), out);
  for (std::size_t i = 0; i < decoder_.size(); ++i) decoder_[i].collect_parameters("decoder." + std::to_string(i), out);
  output_head_.collect_parameters("output_head", out);
  return out;
}

Tensor mle_loss(const Tensor& logits, const TokenMatrix& target) {
  if (logits.rank() != 3 || logits.dim(0) != target.batch || logits.dim(1) != target.length) {
    throw ad::ShapeError("mle_loss: logits " + ad::to_string(logits.shape()) + " vs target [" +
                         std::to_string(target.batch) + ", " + std::to_string(target.length) + "]");
  }
  return ad::nll_loss(logits, target.ids, text::kPad);
}

double next_token_accuracy(const Tensor& logits, const TokenMatrix& target) {
  const std::size_t vocab = logits.dim(-1);
  const auto data = logits.data();
  std::size_t counted = 0, correct = 0;
  for (std::size_t i = 0; i < target.ids.size(); ++i) {
    if (target.ids[i] == text::kPad) continue;
    const Scalar* row = data.data() + i * vocab;
    std::size_t best = 0;
    for (std::size_t v = 1; v < vocab; ++v)
      if (row[v] > row[best]) best = v;
    ++counted;
    correct += static_cast<TokenId>(best) == target.ids[i];
  }
  return counted ? static_cast<double>(correct) / static_cast<double>(counted) : 0.0;
}

GumbelRollout gumbel_generate(const GeneratorModel& model, const TokenMatrix& question, nn::Rng& noise_rng,
                              double temperature, const ForwardContext& ctx, std::size_t steps) {
  if (!(temperature > 0)) throw std::invalid_argument("gumbel_generate: temperature must be positive");
  const std::size_t max_len = model.config().max_len;
  if (steps == 0) steps = max_len;
  if (steps > max_len) throw std::invalid_argument("gumbel_generate: steps exceed max_len");
  const std::size_t batch = question.batch;
  const std::size_t vocab = model.vocab_size();

  const Tensor memory = model.encode(question, ctx);
  std::vector<std::vector<TokenId>> prefix(batch, std::vector<TokenId>{text::kBos});
  std::vector<Tensor> soft_steps;
  soft_steps.reserve(steps);
  TokenMatrix hard;
  hard.batch = batch;
  hard.length = steps;
  hard.ids.assign(batch * steps, text::kPad);

  // Open interval so both logarithms stay finite.
  std::uniform_real_distribution<double> uniform(std::numeric_limits<double>::min(), 1.0);
  const Scalar inv_tau = static_cast<Scalar>(1.0 / temperature);

  for (std::size_t t = 0; t < steps; ++t) {
    const TokenMatrix answer_in = TokenMatrix::from_rows(prefix, t + 1);
    const Tensor hidden = model.decode(memory, question, answer_in, ctx);
    const Tensor last = model.output_logits(ad::slice(hidden, 1, t, t + 1));  // [B, 1, V]
    std::vector<Scalar> noise(batch * vocab);
    for (auto& g : noise) {
      double u = uniform(noise_rng);
      if (u >= 1.0) u = std::nextafter(1.0, 0.0);
      g = static_cast<Scalar>(-std::log(-std::log(u)));
    }
    const Tensor soft = ad::softmax(ad::scale(ad::add(last, Tensor::from({batch, 1, vocab}, std::move(noise))), inv_tau));
    const auto probs = soft.data();
    for (std::size_t b = 0; b < batch; ++b) {
      const Scalar* row = probs.data() + b * vocab;
      // Control ids other than EOS never become answer tokens.
      std::size_t best = static_cast<std::size_t>(text::kEos);
      for (std::size_t v = 0; v < vocab; ++v) {
        const auto id = static_cast<TokenId>(v);
        if (id == text::kPad || id == text::kBos || id == text::kSep) continue;
        if (row[v] > row[best]) best = v;
      }
      hard.ids[b * steps + t] = static_cast<TokenId>(best);
      prefix[b].push_back(static_cast<TokenId>(best));
    }
    soft_steps.push_back(soft);
  }

  GumbelRollout out;
  out.hard = std::move(hard);
  out.soft = ad::concat(soft_steps, 1);
  std::vector<Scalar> one_hot(batch * steps * vocab, Scalar(0));
  for (std::size_t i = 0; i < batch * steps; ++i) one_hot[i * vocab + static_cast<std::size_t>(out.hard.ids[i])] = 1;
  out.straight_through = ad::straight_through(out.soft, Tensor::from({batch, steps, vocab}, std::move(one_hot)));
  return out;
}

std::vector<std::vector<TokenId>> infer(const GeneratorModel& model, const TokenMatrix& question,
                                        std::size_t max_steps) {
  ad::NoGradGuard no_grad;
  const ForwardContext ctx{};
  max_steps = std::min(max_steps, model.config().max_len);
  const std::size_t batch = question.batch;
  const std::size_t vocab = model.vocab_size();
  const Tensor memory = model.encode(question, ctx);

  std::vector<std::vector<TokenId>> prefix(batch, std::vector<TokenId>{text::kBos});
  std::vector<std::vector<TokenId>> answers(batch);
  std::vector<bool> done(batch, false);
  std::size_t remaining = batch;
  for (std::size_t t = 0; t < max_steps && remaining > 0; ++t) {
    const TokenMatrix answer_in = TokenMatrix::from_rows(prefix, t + 1);
    const Tensor last = model.output_logits(ad::slice(model.decode(memory, question, answer_in, ctx), 1, t, t + 1));
    const auto logits = last.data();
    for (std::size_t b = 0; b < batch; ++b) {
      const Scalar* row = logits.data() + b * vocab;
      TokenId best = text::kEos;
      for (std::size_t v = 0; v < vocab; ++v) {
        const auto id = static_cast<TokenId>(v);
        if (id == text::kPad || id == text::kBos || id == text::kSep) continue;
        if (row[v] > row[static_cast<std::size_t>(best)]) best = id;
      }
      prefix[b].push_back(best);
      if (done[b]) continue;
      if (best == text::kEos) {
        done[b] = true;
        --remaining;
      } else {
        answers[b].push_back(best);
      }
    }
  }
  return answers;
}

std::vector<TokenId> infer(const GeneratorModel& model, std::span<const TokenId> question, std::size_t max_steps) {
  TokenMatrix m;
  m.batch = 1;
  m.length = question.size();
  m.ids.assign(question.begin(), question.end());
  return infer(model, m, max_steps).front();
}

std::vector<std::pair<std::string, double>> gradient_norms_by_block(const ad::ParameterList& params,
                                                                    std::size_t depth) {
  std::map<std::string, double> sums;
  std::vector<std::string> order;
  for (const auto& p : params) {
    std::string key = p.name;
    if (depth > 0) {
      std::size_t pos = 0;
      for (std::size_t d = 0; d < depth && pos != std::string::npos; ++d) {
        pos = key.find('.', pos == 0 ? 0 : pos + 1);
      }
      if (pos != std::string::npos) key.resize(pos);
    }
    if (!sums.count(key)) order.push_back(key);
    double& s = sums[key];
    if (p.tensor.has_grad())
      for (Scalar g : p.tensor.grad()) s += static_cast<double>(g) * static_cast<double>(g);
  }
  std::vector<std::pair<std::string, double>> out;
  for (const auto& k : order) out.emplace_back(k, sums[k]);
  return out;
}

}  // namespace cwgan::inline CWGAN_PRECISION_NS::model
