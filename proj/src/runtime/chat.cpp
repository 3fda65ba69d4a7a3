#include "cwgan/runtime/chat.hpp"

#include <chrono>
#include <iostream>

#include <json.hpp>

namespace cwgan::runtime {

std::string turn_json(const ChatTurn& turn) {
  nlohmann::ordered_json j;
  j["session_id"] = turn.session_id;
  j["user_text"] = turn.user_text;
  j["bot_text"] = turn.bot_text;
  j["token_count"] = turn.token_count;
  j["latency_ms"] = turn.latency_ms;
  return j.dump();
}

ChatEngine::ChatEngine(std::shared_ptr<const model::GeneratorModel> generator, text::Vocab vocab,
                       std::string checkpoint_id, AppConfig config)
    : generator_(std::move(generator)),
      vocab_(std::move(vocab)),
      checkpoint_id_(std::move(checkpoint_id)),
      config_(std::move(config)) {
  if (!generator_) throw std::invalid_argument("ChatEngine: no generator");
  if (config_.runtime.decode_cap == 0) throw std::invalid_argument("decode_cap must be positive");
}

std::shared_ptr<const ChatEngine> ChatEngine::load(const std::filesystem::path& checkpoint,
                                                   const RuntimeConfig& runtime) {
  auto loaded = train::load_checkpoint(checkpoint);
  AppConfig config = loaded.contents.config;
  config.runtime = runtime;
  config.runtime.checkpoint = checkpoint.string();
  return std::make_shared<const ChatEngine>(std::move(loaded.generator), std::move(loaded.contents.vocab),
                                            loaded.id, std::move(config));
}

ChatTurn ChatEngine::reply(const std::string& session_id, const std::string& message) const {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t steps = std::min(config_.runtime.decode_cap, config_.model.generator.max_len);
  train::Answer answer = train::answer_question(*generator_, vocab_, message, steps);
  ChatTurn turn;
  turn.session_id = session_id;
  turn.user_text = message;
  turn.token_count = answer.ids.size();
  turn.bot_text = answer.text.empty() ? config_.runtime.fallback_answer : answer.text;
  turn.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return turn;
}

std::uint64_t ChatEngine::weights_checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : generator_->parameters()) {
    const auto data = p.tensor.data();
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(data.data());
    for (std::size_t i = 0; i < data.size_bytes(); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

TranscriptWriter::TranscriptWriter(const std::filesystem::path& path) : out_(path, std::ios::app) {
  if (!out_) throw std::runtime_error("cannot open transcript " + path.string());
}

void TranscriptWriter::append(const ChatTurn& turn) {
  std::lock_guard lock(mutex_);
  out_ << turn_json(turn) << '\n';
  out_.flush();
}

std::size_t chat_repl(const ChatEngine& engine, std::istream& in, std::ostream& out, TranscriptWriter* transcript,
                      const std::string& session_id) {
  std::size_t turns = 0;
  std::string line;
  while (true) {
    out << "> " << std::flush;
    if (!std::getline(in, line)) break;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line == "/quit") break;
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const ChatTurn turn = engine.reply(session_id, line);
    out << turn.bot_text << '\n';
    if (transcript) transcript->append(turn);
    ++turns;
  }
  return turns;
}

}  // namespace cwgan::runtime
