#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cwgan/config.hpp"
#include "cwgan/train/trainer.hpp"
#include "cwgan/text/vocab.hpp"

namespace cwgan::inline CWGAN_PRECISION_NS::train {

// Layout (all integers little-endian):
//   "CWGC" | u32 version | u32 len + config text | u32 count + (u32 len + token)*
//   | u32 count + (u32 len + name, u32 rank, u32 dims..., f32 values...)*
//   | u64 FNV-1a of every preceding byte

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class CheckpointErrorCode { io, bad_magic, bad_version, bad_checksum, malformed, incompatible };
const char* error_code_name(CheckpointErrorCode code);

class CheckpointError : public std::runtime_error {
 public:
  CheckpointError(CheckpointErrorCode code, const std::string& message);
  CheckpointErrorCode code() const { return code_; }

 private:
  CheckpointErrorCode code_;
};

struct StoredTensor {
  std::string name;
  std::vector<std::uint32_t> shape;
  std::vector<float> values;
};

struct TrainSnapshot {
  TrainPhase phase = TrainPhase::pretrain;
  std::size_t epoch = 0;
  std::size_t step = 0;
  bool pretrained = false;
  std::string rng_state;  // textual engine state; empty when unknown
};

struct CheckpointContents {
  AppConfig config;  // runtime section is not stored
  text::Vocab vocab;
  TrainSnapshot state;
  std::vector<StoredTensor> tensors;
};

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> serialize_checkpoint(const CheckpointContents& contents);
/// Checks magic, then version, then checksum, then structure.
CheckpointContents parse_checkpoint(std::span<const std::uint8_t> bytes);

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

/// Snapshot of live models. Parameters are named "generator.*" and "critic.*".
CheckpointContents capture(const AppConfig& config, const text::Vocab& vocab, const GeneratorModel& generator,
                           const CriticModel* critic, const TrainState* state);

/// Returns the checkpoint id (hex checksum).
std::string save_checkpoint(const std::filesystem::path& path, const CheckpointContents& contents);

/// Copies stored tensors with the given prefix into `params`; names and
/// shapes must match one to one.
void restore_parameters(const ad::ParameterList& params, const std::vector<StoredTensor>& tensors,
                        const std::string& prefix);

struct LoadedCheckpoint {
  CheckpointContents contents;
  std::shared_ptr<GeneratorModel> generator;
  std::shared_ptr<CriticModel> critic;  // null when the file holds no critic
  std::string id;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);
LoadedCheckpoint load_checkpoint_bytes(std::span<const std::uint8_t> bytes);

/// Applies a snapshot to a training state (rng, counters, phase).
void restore_state(const TrainSnapshot& snapshot, TrainState& state);

std::string checksum_hex(std::uint64_t checksum);

}  // namespace cwgan::inline CWGAN_PRECISION_NS::train
