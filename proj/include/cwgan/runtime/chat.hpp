#pragma once

#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <string>

#include "cwgan/config.hpp"
#include "cwgan/train/checkpoint.hpp"
#include "cwgan/train/evaluate.hpp"

namespace cwgan::runtime {

struct ChatTurn {
  std::string session_id;
  std::string user_text;
  std::string bot_text;
  std::size_t token_count = 0;
  double latency_ms = 0;
};

std::string turn_json(const ChatTurn& turn);

/// Read-only question answering over a loaded generator. Safe to share
/// between threads.
class ChatEngine {
 public:
  ChatEngine(std::shared_ptr<const model::GeneratorModel> generator, text::Vocab vocab, std::string checkpoint_id,
             AppConfig config);

  static std::shared_ptr<const ChatEngine> load(const std::filesystem::path& checkpoint, const RuntimeConfig& runtime);

  /// Greedy reply capped at the runtime decode cap; the fallback string
  /// replaces an empty decode.
  ChatTurn reply(const std::string& session_id, const std::string& message) const;

  const std::string& checkpoint_id() const { return checkpoint_id_; }
  const AppConfig& config() const { return config_; }
  const text::Vocab& vocab() const { return vocab_; }
  const model::GeneratorModel& generator() const { return *generator_; }
  std::size_t max_message_chars() const { return config_.model.generator.max_len * 8; }

  /// FNV-1a over every parameter's bytes.
  std::uint64_t weights_checksum() const;

 private:
  std::shared_ptr<const model::GeneratorModel> generator_;
  text::Vocab vocab_;
  std::string checkpoint_id_;
  AppConfig config_;
};

/// Appends ChatTurn records as JSON lines; thread-safe.
class TranscriptWriter {
 public:
  explicit TranscriptWriter(const std::filesystem::path& path);
  void append(const ChatTurn& turn);

 private:
  std::mutex mutex_;
  std::ofstream out_;
};

/// Line-oriented chat loop: `/quit` or end of input exits, blank lines are
/// skipped. Returns the number of answered turns.
std::size_t chat_repl(const ChatEngine& engine, std::istream& in, std::ostream& out, TranscriptWriter* transcript,
                      const std::string& session_id = "repl");

}  // namespace cwgan::runtime
