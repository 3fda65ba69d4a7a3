#include <doctest.h>

#include <cmath>
#include <sstream>

#include "cwgan/train/evaluate.hpp"
#include "cwgan/train/trainer.hpp"
#include "support/models.hpp"
#include "support/toy.hpp"

using namespace cwgan;
using namespace cwgan::testing;
using namespace cwgan::testkit;
using namespace cwgan::train;

namespace {

TrainConfig small_train() {
  TrainConfig t;
  t.batch_size = 8;
  t.pretrain_epochs = 2;
  t.pretrain_learning_rate = 0.003;
  t.learning_rate = 0.0005;
  t.critic_steps = 2;
  t.clip_c = 0.01;
  return t;
}

}  // namespace

TEST_CASE("pretraining lowers the MLE loss and records history") {
  const auto toy = copy_corpus(12, 32, 6, 1);
  nn::Rng init(1);
  model::GeneratorModel gen(tiny_generator(12, 6), init);
  auto cfg = small_train();
  cfg.pretrain_epochs = 15;
  auto state = make_train_state(3);
  std::size_t epochs_seen = 0;
  TrainHooks hooks;
  hooks.on_epoch_end = [&](TrainPhase phase, std::size_t epoch, const TrainState&) {
    CHECK(phase == TrainPhase::pretrain);
    CHECK(epoch == ++epochs_seen);
  };
  pretrain(gen, toy.encoded, cfg, state, hooks);
  CHECK(state.pretrained);
  CHECK(epochs_seen == 15);
  REQUIRE(state.history.size() == 15 * 4);
  CHECK(state.history.back().loss_g.value() < state.history.front().loss_g.value());
  for (const auto& r : state.history) {
    CHECK(r.phase == TrainPhase::pretrain);
    CHECK_FALSE(r.loss_c.has_value());
  }
}

TEST_CASE("zero pretraining epochs leaves the state untouched") {
  const auto toy = copy_corpus(12, 8, 6, 1);
  nn::Rng init(1);
  model::GeneratorModel gen(tiny_generator(12, 6), init);
  auto cfg = small_train();
  cfg.pretrain_epochs = 0;
  auto state = make_train_state(3);
  pretrain(gen, toy.encoded, cfg, state);
  CHECK_FALSE(state.pretrained);
  CHECK(state.history.empty());
}

TEST_CASE("adversarial training refuses an unpretrained generator") {
  nn::Rng init(1);
  model::GeneratorModel gen(tiny_generator(12, 6), init);
  model::CriticModel critic(tiny_critic(), 12, 6, init);
  auto cfg = small_train();
  auto state = make_train_state(3);
  CHECK_THROWS_AS(AdversarialTrainer(gen, critic, cfg, state), PhaseOrderError);
  cfg.allow_cold_start = true;
  CHECK_NOTHROW(AdversarialTrainer(gen, critic, cfg, state));
}

TEST_CASE("adversarial epoch keeps the critic clipped and records k critic steps per generator step") {
  const auto toy = copy_corpus(12, 16, 6, 2);
  nn::Rng init(4);
  model::GeneratorModel gen(tiny_generator(12, 6), init);
  model::CriticModel critic(tiny_critic(), 12, 6, init);
  auto cfg = small_train();
  cfg.allow_cold_start = true;
  auto state = make_train_state(5);
  AdversarialTrainer trainer(gen, critic, cfg, state);
  const auto critic_before = critic.parameters().front().tensor.clone();
  const auto gen_before = gen.parameters().back().tensor.clone();
  const std::size_t steps = trainer.run_epoch(toy.encoded);
  CHECK(steps == 2);
  CHECK(trainer.generator_steps() == 2);
  CHECK(critic.max_abs_weight() <= cfg.clip_c + 1e-7);
  REQUIRE(state.history.size() == 2 * (cfg.critic_steps + 1));
  for (std::size_t i = 0; i < state.history.size(); ++i) {
    const auto& r = state.history[i];
    CHECK(r.phase == TrainPhase::adversarial);
    const bool is_gen = i % (cfg.critic_steps + 1) == cfg.critic_steps;
    CHECK(r.loss_g.has_value() == is_gen);
    CHECK(r.loss_c.has_value() == !is_gen);
    CHECK(std::isfinite(r.loss_g.value_or(r.loss_c.value_or(0))));
  }
  bool gen_moved = false;
  const auto gen_after = gen.parameters().back().tensor;
  for (std::size_t i = 0; i < gen_after.numel(); ++i) gen_moved |= gen_after.data()[i] != gen_before.data()[i];
  CHECK(gen_moved);
  (void)critic_before;
}

TEST_CASE("step limit stops the epoch early") {
  const auto toy = copy_corpus(12, 40, 6, 2);
  nn::Rng init(4);
  model::GeneratorModel gen(tiny_generator(12, 6), init);
  model::CriticModel critic(tiny_critic(), 12, 6, init);
  auto cfg = small_train();
  cfg.allow_cold_start = true;
  auto state = make_train_state(5);
  AdversarialTrainer trainer(gen, critic, cfg, state);
  CHECK(trainer.run_epoch(toy.encoded, {}, 1) == 1);
}

TEST_CASE("training modes") {
  const auto toy = copy_corpus(12, 16, 6, 3);
  for (auto mode : {TrainingMode::pretrain_only, TrainingMode::adversarial_only, TrainingMode::combined}) {
    CAPTURE(mode_name(mode));
    nn::Rng init(4);
    model::GeneratorModel gen(tiny_generator(12, 6), init);
    model::CriticModel critic(tiny_critic(), 12, 6, init);
    auto cfg = small_train();
    cfg.pretrain_epochs = 1;
    cfg.adv_epochs = 1;
    auto state = make_train_state(5);
    run_training({mode, 1}, gen, critic, toy.encoded, cfg, state);
    bool saw_pre = false, saw_adv = false;
    for (const auto& r : state.history) {
      saw_pre |= r.phase == TrainPhase::pretrain;
      saw_adv |= r.phase == TrainPhase::adversarial;
    }
    CHECK(saw_pre == (mode != TrainingMode::adversarial_only));
    CHECK(saw_adv == (mode != TrainingMode::pretrain_only));
  }
}

TEST_CASE("same seed, same history") {
  const auto toy = copy_corpus(12, 16, 6, 3);
  auto run = [&] {
    nn::Rng init(4);
    model::GeneratorModel gen(tiny_generator(12, 6), init);
    model::CriticModel critic(tiny_critic(), 12, 6, init);
    auto cfg = small_train();
    cfg.pretrain_epochs = 1;
    cfg.adv_epochs = 1;
    auto state = make_train_state(9);
    run_training({TrainingMode::combined, 1}, gen, critic, toy.encoded, cfg, state);
    std::ostringstream csv;
    write_history_csv(csv, state.history);
    return csv.str();
  };
  const std::string a = run();
  CHECK(a == run());
  CHECK(a.rfind("phase,step,loss_g,loss_c\n", 0) == 0);
}

TEST_CASE("history csv leaves missing losses empty") {
  std::vector<LossRecord> h(2);
  h[0].loss_g = 1.5;
  h[1].phase = TrainPhase::adversarial;
  h[1].step = 1;
  h[1].loss_c = -0.25;
  std::ostringstream out;
  write_history_csv(out, h);
  CHECK(out.str() == "phase,step,loss_g,loss_c\npretrain,0,1.5,\nadversarial,1,,-0.25\n");
}

TEST_CASE("shuffled batches cover the corpus once") {
  const auto toy = copy_corpus(12, 10, 6, 3);
  nn::Rng rng(1);
  const auto batches = shuffled_batches(toy.encoded, 4, rng);
  REQUIRE(batches.size() == 3);
  std::size_t rows = 0;
  for (const auto& b : batches) rows += b.batch;
  CHECK(rows == 10);
}

TEST_CASE("answer_question decodes text and evaluation scores it") {
  const auto toy = copy_corpus(12, 8, 6, 3);
  nn::Rng init(4);
  model::GeneratorModel gen(tiny_generator(12, 6), init);
  const auto a = answer_question(gen, toy.vocab, "t1 t2", 6);
  CHECK(a.ids.size() <= 6);
  CHECK(a.text == toy.vocab.decode_text(a.ids));
  const auto report = evaluate_generator(gen, toy.vocab, toy.pairs);
  CHECK(report.n == 8);
  CHECK(report.bleu4 >= 0);
}
