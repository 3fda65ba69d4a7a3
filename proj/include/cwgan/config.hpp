#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace cwgan {

enum class PositionalCombine { add, concat };

/// What the critic sees for generated answer tokens during generator updates.
enum class CriticFeed {
  straight_through,  // hard one-hot forward, softmax gradient backward
  soft,              // the Gumbel-softmax distribution itself
};

enum class CriticPooling { mean, first_token };

struct GeneratorConfig {
  std::size_t vocab_size = 0;  // 0 until a vocabulary is attached
  std::size_t n_layers = 8;
  std::size_t n_heads = 16;
  std::size_t d_model = 64;
  std::size_t embed_dim = 768;
  std::size_t ff_dim = 256;
  std::size_t max_len = 30;
  double dropout = 0.5;
  double gumbel_temperature = 1.0;
  PositionalCombine positional_combine = PositionalCombine::add;
  CriticFeed critic_feed = CriticFeed::straight_through;
};

struct CriticConfig {
  std::size_t n_layers = 8;
  std::size_t n_heads = 16;
  std::size_t d_model = 64;
  std::size_t embed_dim = 768;
  std::size_t ff_dim = 256;
  double dropout = 0.5;
  CriticPooling pooling = CriticPooling::mean;
};

struct ModelConfig {
  GeneratorConfig generator;
  CriticConfig critic;
};

struct TrainConfig {
  std::size_t pretrain_epochs = 200;
  std::size_t adv_epochs = 400;
  std::size_t batch_size = 64;
  std::size_t critic_steps = 5;
  double clip_c = 0.01;
  double learning_rate = 0.00005;
  double pretrain_learning_rate = 0.00005;
  std::uint64_t seed = 5489;
  std::size_t checkpoint_every = 10;
  std::size_t eval_every = 10;
  bool allow_cold_start = false;
};

struct TextConfig {
  std::size_t min_frequency = 3;
  std::size_t max_vocab = 20000;
  double test_ratio = 0.2;
};

struct RuntimeConfig {
  std::string checkpoint;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t max_sessions = 4;
  std::size_t decode_cap = 30;
  std::size_t request_timeout_ms = 30000;
  std::string fallback_answer = "i do not know";
  std::string transcript_path;
};

struct AppConfig {
  ModelConfig model;
  TrainConfig train;
  TextConfig text;
  RuntimeConfig runtime;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ConfigScope {
  persisted,  // model, training and text keys (stored in checkpoints)
  all,
};

/// Sets one `key = value` entry. Throws ConfigError for unknown keys or bad values.
void set_config_value(AppConfig& config, const std::string& key, const std::string& value);

/// Parses flat `key = value` text; `#` starts a comment. Keys apply in order.
void apply_config_text(AppConfig& config, const std::string& text);
void apply_config_file(AppConfig& config, const std::filesystem::path& path);

/// Canonical `key = value` rendering in a fixed key order.
std::string dump_config(const AppConfig& config, ConfigScope scope = ConfigScope::all);

/// Checks cross-field invariants (positive counts, divisibility, ranges).
void validate_config(const AppConfig& config);

/// Shortest decimal that round-trips the double exactly.
std::string format_double(double value);

}  // namespace cwgan
