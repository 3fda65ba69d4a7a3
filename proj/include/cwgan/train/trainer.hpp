#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "cwgan/ad/optimizer.hpp"
#include "cwgan/model/critic.hpp"
#include "cwgan/model/generator.hpp"

namespace cwgan::inline CWGAN_PRECISION_NS::train {

using ad::Tensor;
using model::CriticModel;
using model::GeneratorModel;
using text::EncodedPair;

enum class TrainPhase { pretrain, adversarial };
const char* phase_name(TrainPhase phase);

struct LossRecord {
  TrainPhase phase = TrainPhase::pretrain;
  std::size_t step = 0;
  std::size_t epoch = 0;
  std::optional<double> loss_g;  // MLE loss while pretraining
  std::optional<double> loss_c;
};

struct TrainState {
  TrainPhase phase = TrainPhase::pretrain;
  std::size_t epoch = 0;  // completed epochs of the current phase
  std::size_t step = 0;   // records appended so far
  bool pretrained = false;
  nn::Rng rng{5489};
  std::vector<LossRecord> history;
};

TrainState make_train_state(std::uint64_t seed);

/// `phase,step,loss_g,loss_c`; missing values are empty fields.
void write_history_csv(std::ostream& out, const std::vector<LossRecord>& history);
void write_history_csv(const std::filesystem::path& path, const std::vector<LossRecord>& history);

class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Adversarial training requested before any pretraining.
class PhaseOrderError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// The critic left the clip box after a step.
class ClipViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct TrainHooks {
  std::function<void(const LossRecord&)> on_record;
  /// Called after each finished epoch with its 1-based index within the phase.
  std::function<void(TrainPhase, std::size_t epoch, const TrainState&)> on_epoch_end;
};

/// Teacher-forced MLE with Adam over shuffled batches for
/// config.pretrain_epochs epochs. Marks the state pretrained when at least
/// one epoch ran.
void pretrain(GeneratorModel& generator, const std::vector<EncodedPair>& corpus, const TrainConfig& config,
              TrainState& state, const TrainHooks& hooks = {});

/// k critic updates then one generator update per batch, both with RMSprop.
class AdversarialTrainer {
 public:
  /// Throws PhaseOrderError unless the state is pretrained or the config
  /// allows a cold start.
  AdversarialTrainer(GeneratorModel& generator, CriticModel& critic, const TrainConfig& config,
                     TrainState& state);

  /// One pass over the corpus. Stops early after `max_generator_steps`
  /// generator updates; returns how many ran.
  std::size_t run_epoch(const std::vector<EncodedPair>& corpus, const TrainHooks& hooks = {},
                        std::size_t max_generator_steps = std::numeric_limits<std::size_t>::max());

  /// One critic update on `batch` (real answers against fresh rollouts of
  /// the same questions), followed by clipping. Returns the critic loss.
  double critic_step(const text::Batch& batch, const TrainHooks& hooks = {});
  /// One generator update through the frozen critic. Returns -mean(score(fake)).
  double generator_step(const text::Batch& batch, const TrainHooks& hooks = {});

  std::size_t generator_steps() const { return generator_steps_; }

 private:
  void append(LossRecord record, const TrainHooks& hooks);

  GeneratorModel& generator_;
  CriticModel& critic_;
  TrainConfig config_;
  TrainState& state_;
  ad::OptimizerState generator_opt_;
  ad::OptimizerState critic_opt_;
  std::size_t generator_steps_ = 0;
};

enum class TrainingMode { pretrain_only, adversarial_only, combined };
const char* mode_name(TrainingMode mode);

struct TrainingPlan {
  TrainingMode mode = TrainingMode::combined;
  /// Caps the adversarial phase at this many generator updates overall.
  std::size_t adversarial_step_limit = std::numeric_limits<std::size_t>::max();
};

/// Runs the phases selected by the mode. Adversarial-only skips the
/// pretraining check by design.
void run_training(const TrainingPlan& plan, GeneratorModel& generator, CriticModel& critic,
                  const std::vector<EncodedPair>& corpus, const TrainConfig& config, TrainState& state,
                  const TrainHooks& hooks = {});

/// Shuffles with the state's generator and cuts into batches.
std::vector<text::Batch> shuffled_batches(const std::vector<EncodedPair>& corpus, std::size_t batch_size,
                                          nn::Rng& rng);

}  // namespace cwgan::inline CWGAN_PRECISION_NS::train
