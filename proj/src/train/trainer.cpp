#include "cwgan/train/trainer.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

namespace cwgan::inline CWGAN_PRECISION_NS::train {

const char* phase_name(TrainPhase phase) {
  return phase == TrainPhase::pretrain ? "pretrain" : "adversarial";
}

const char* mode_name(TrainingMode mode) {
  switch (mode) {
    case TrainingMode::pretrain_only: return "pretrain-only";
    case TrainingMode::adversarial_only: return "adversarial-only";
    case TrainingMode::combined: return "combined";
  }
  return "?";
}

TrainState make_train_state(std::uint64_t seed) {
  TrainState state;
  state.rng.seed(seed);
  return state;
}

void write_history_csv(std::ostream& out, const std::vector<LossRecord>& history) {
  out << "phase,step,loss_g,loss_c\n";
  out.precision(9);
  for (const auto& r : history) {
    out << phase_name(r.phase) << ',' << r.step << ',';
    if (r.loss_g) out << *r.loss_g;
    out << ',';
    if (r.loss_c) out << *r.loss_c;
    out << '\n';
  }
}

void write_history_csv(const std::filesystem::path& path, const std::vector<LossRecord>& history) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_history_csv(out, history);
}

std::vector<text::Batch> shuffled_batches(const std::vector<EncodedPair>& corpus, std::size_t batch_size,
                                          nn::Rng& rng) {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  std::vector<EncodedPair> order = corpus;
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  std::vector<text::Batch> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    out.push_back(text::make_batch(std::span(order).subspan(start, std::min(batch_size, order.size() - start))));
  }
  return out;
}

namespace {

void check_finite(double loss, const char* what, TrainPhase phase, std::size_t epoch, std::size_t batch) {
  if (!std::isfinite(loss)) {
    throw NonFiniteLoss(std::string(what) + " loss is " + std::to_string(loss) + " in " + phase_name(phase) +
                        " epoch " + std::to_string(epoch + 1) + ", batch " + std::to_string(batch));
  }
}

}  // namespace

void pretrain(GeneratorModel& generator, const std::vector<EncodedPair>& corpus, const TrainConfig& config,
              TrainState& state, const TrainHooks& hooks) {
  if (config.pretrain_epochs == 0) return;
  if (corpus.empty()) throw std::invalid_argument("pretrain: empty corpus");
  state.phase = TrainPhase::pretrain;
  state.epoch = 0;
  const ad::ParameterList params = generator.parameters();
  ad::OptimizerState adam = ad::make_optimizer(ad::OptimizerKind::adaptive_moment, config.pretrain_learning_rate);
  const nn::ForwardContext ctx{true, &state.rng};

  for (std::size_t epoch = 0; epoch < config.pretrain_epochs; ++epoch) {
    const auto batches = shuffled_batches(corpus, config.batch_size, state.rng);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& batch = batches[b];
      ad::zero_grads(params);
      const Tensor logits = generator.teacher_forced_logits(batch.question, batch.answer_in, ctx);
      const Tensor loss = model::mle_loss(logits, batch.answer_target);
      const double value = static_cast<double>(loss.item());
      check_finite(value, "MLE", TrainPhase::pretrain, epoch, b);
      ad::backward(loss);
      ad::optimizer_step(adam, params);
      LossRecord rec{TrainPhase::pretrain, state.step++, epoch, value, std::nullopt};
      state.history.push_back(rec);
      if (hooks.on_record) hooks.on_record(rec);
    }
    state.epoch = epoch + 1;
    state.pretrained = true;
    if (hooks.on_epoch_end) hooks.on_epoch_end(TrainPhase::pretrain, epoch + 1, state);
  }
  ad::zero_grads(params);
}

AdversarialTrainer::AdversarialTrainer(GeneratorModel& generator, CriticModel& critic, const TrainConfig& config,
                                       TrainState& state)
    : generator_(generator),
      critic_(critic),
      config_(config),
      state_(state),
      generator_opt_(ad::make_optimizer(ad::OptimizerKind::rms_propagation, config.learning_rate)),
      critic_opt_(ad::make_optimizer(ad::OptimizerKind::rms_propagation, config.learning_rate)) {
  if (!state.pretrained && !config.allow_cold_start) {
    throw PhaseOrderError(
        "adversarial training needs a pretrained generator; pretrain first or allow a cold start explicitly");
  }
  if (config.critic_steps == 0 || !(config.clip_c > 0)) {
    throw std::invalid_argument("adversarial training needs critic_steps > 0 and clip_c > 0");
  }
  if (state_.phase != TrainPhase::adversarial) {
    state_.phase = TrainPhase::adversarial;
    state_.epoch = 0;
  }
}

void AdversarialTrainer::append(LossRecord record, const TrainHooks& hooks) {
  record.step = state_.step++;
  record.epoch = state_.epoch;
  state_.history.push_back(record);
  if (hooks.on_record) hooks.on_record(record);
}

double AdversarialTrainer::critic_step(const text::Batch& batch, const TrainHooks& hooks) {
  const std::size_t max_len = generator_.config().max_len;
  model::GumbelRollout rollout;
  {
    ad::NoGradGuard no_grad;
    rollout = model::gumbel_generate(generator_, batch.question, state_.rng,
                                     generator_.config().gumbel_temperature, nn::ForwardContext{});
  }
  const model::PairBatch real = model::make_real_pairs(batch.question, batch.answer_target, max_len);
  const model::PairBatch fake = model::make_fake_pairs(batch.question, rollout.hard, max_len);

  const ad::ParameterList params = critic_.parameters();
  ad::zero_grads(params);
  const Tensor loss = model::critic_loss(critic_, real, fake, nn::ForwardContext{true, &state_.rng});
  const double value = static_cast<double>(loss.item());
  check_finite(value, "critic", TrainPhase::adversarial, state_.epoch, generator_steps_);
  ad::backward(loss);
  ad::optimizer_step(critic_opt_, params);
  ad::zero_grads(params);
  critic_.clip_weights(config_.clip_c);
  if (critic_.max_abs_weight() > config_.clip_c) {
    throw ClipViolation("critic weight " + std::to_string(critic_.max_abs_weight()) + " exceeds clip bound " +
                        std::to_string(config_.clip_c));
  }
  append({TrainPhase::adversarial, 0, 0, std::nullopt, value}, hooks);
  return value;
}

double AdversarialTrainer::generator_step(const text::Batch& batch, const TrainHooks& hooks) {
  const GeneratorConfig& gc = generator_.config();
  const ad::ParameterList params = generator_.parameters();
  ad::zero_grads(params);
  const model::GumbelRollout rollout = model::gumbel_generate(
      generator_, batch.question, state_.rng, gc.gumbel_temperature, nn::ForwardContext{true, &state_.rng});
  const Tensor& rows = gc.critic_feed == CriticFeed::soft ? rollout.soft : rollout.straight_through;
  const model::PairBatch fake = model::make_fake_pairs(batch.question, rollout.hard, gc.max_len, rows);
  const Tensor loss = model::generator_adv_loss(critic_, fake, nn::ForwardContext{});
  const double value = static_cast<double>(loss.item());
  check_finite(value, "generator", TrainPhase::adversarial, state_.epoch, generator_steps_);
  ad::backward(loss);
  ad::optimizer_step(generator_opt_, params);
  ad::zero_grads(params);
  ++generator_steps_;
  append({TrainPhase::adversarial, 0, 0, value, std::nullopt}, hooks);
  return value;
}

std::size_t AdversarialTrainer::run_epoch(const std::vector<EncodedPair>& corpus, const TrainHooks& hooks,
                                          std::size_t max_generator_steps) {
  if (corpus.empty()) throw std::invalid_argument("adversarial epoch: empty corpus");
  const auto batches = shuffled_batches(corpus, config_.batch_size, state_.rng);
  const std::size_t sample = std::min(config_.batch_size, corpus.size());
  std::vector<std::size_t> index(corpus.size());
  std::size_t done = 0;
  for (const auto& batch : batches) {
    if (done >= max_generator_steps) break;
    for (std::size_t k = 0; k < config_.critic_steps; ++k) {
      // Critic batches are drawn independently of the epoch order.
      std::iota(index.begin(), index.end(), 0);
      std::vector<EncodedPair> picked;
      for (std::size_t i = 0; i < sample; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(state_.rng() % (index.size() - i));
        std::swap(index[i], index[j]);
        picked.push_back(corpus[index[i]]);
      }
      critic_step(text::make_batch(picked), hooks);
    }
    generator_step(batch, hooks);
    ++done;
  }
  if (done == batches.size()) {
    ++state_.epoch;
    if (hooks.on_epoch_end) hooks.on_epoch_end(TrainPhase::adversarial, state_.epoch, state_);
  }
  return done;
}

void run_training(const TrainingPlan& plan, GeneratorModel& generator, CriticModel& critic,
                  const std::vector<EncodedPair>& corpus, const TrainConfig& config, TrainState& state,
                  const TrainHooks& hooks) {
  if (plan.mode != TrainingMode::adversarial_only) pretrain(generator, corpus, config, state, hooks);
  if (plan.mode == TrainingMode::pretrain_only) return;

  TrainConfig adv = config;
  if (plan.mode == TrainingMode::adversarial_only) adv.allow_cold_start = true;
  AdversarialTrainer trainer(generator, critic, adv, state);
  std::size_t budget = plan.adversarial_step_limit;
  for (std::size_t epoch = 0; epoch < config.adv_epochs && budget > 0; ++epoch) {
    budget -= trainer.run_epoch(corpus, hooks, budget);
  }
}

}  // namespace cwgan::inline CWGAN_PRECISION_NS::train
