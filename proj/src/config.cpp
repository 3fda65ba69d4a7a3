#include "cwgan/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

namespace cwgan {

std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) throw ConfigError("cannot format number");
  return std::string(buf, end);
}

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ConfigError("config: " + key + " = '" + value + "' is not " + expected);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) bad_value(key, value, "a non-negative integer");
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  double out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) bad_value(key, value, "a number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value, "a boolean");
}

struct Entry {
  const char* key;
  bool persisted;
  std::function<std::string(const AppConfig&)> get;
  std::function<void(AppConfig&, const std::string&, const std::string&)> set;
};

template <typename Member>
Entry size_entry(const char* key, bool persisted, Member member) {
  return {key, persisted,
          [member](const AppConfig& c) { return std::to_string(member(const_cast<AppConfig&>(c))); },
          [member](AppConfig& c, const std::string& k, const std::string& v) {
            member(c) = static_cast<std::remove_reference_t<decltype(member(c))>>(parse_u64(k, v));
          }};
}

template <typename Member>
Entry double_entry(const char* key, bool persisted, Member member) {
  return {key, persisted,
          [member](const AppConfig& c) { return format_double(member(const_cast<AppConfig&>(c))); },
          [member](AppConfig& c, const std::string& k, const std::string& v) {
            member(c) = parse_double(k, v);
          }};
}

template <typename Member>
Entry string_entry(const char* key, Member member) {
  return {key, false, [member](const AppConfig& c) { return member(const_cast<AppConfig&>(c)); },
          [member](AppConfig& c, const std::string&, const std::string& v) { member(c) = v; }};
}

template <typename Enum, typename Member>
Entry enum_entry(const char* key, Member member, std::vector<std::pair<Enum, const char*>> names) {
  return {key, true,
          [member, names](const AppConfig& c) {
            const Enum value = member(const_cast<AppConfig&>(c));
            for (const auto& [e, n] : names)
              if (e == value) return std::string(n);
            return std::string("?");
          },
          [member, names](AppConfig& c, const std::string& k, const std::string& v) {
            for (const auto& [e, n] : names) {
              if (v == n) {
                member(c) = e;
                return;
              }
            }
            std::string options;
            for (const auto& [e, n] : names) options += (options.empty() ? "" : "|") + std::string(n);
            bad_value(k, v, ("one of " + options).c_str());
          }};
}

#define FIELD(expr) [](AppConfig& c) -> auto& { return expr; }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      double_entry("learning_rate", true, FIELD(c.train.learning_rate)),
      double_entry("pretrain_learning_rate", true, FIELD(c.train.pretrain_learning_rate)),
      size_entry("batch_size", true, FIELD(c.train.batch_size)),
      size_entry("epoch_numbers", true, FIELD(c.train.adv_epochs)),
      size_entry("pretrain_epochs", true, FIELD(c.train.pretrain_epochs)),
      double_entry("dropout", true, FIELD(c.model.generator.dropout)),
      double_entry("critic_dropout", true, FIELD(c.model.critic.dropout)),
      size_entry("number_of_layers", true, FIELD(c.model.generator.n_layers)),
      size_entry("critic_number_of_layers", true, FIELD(c.model.critic.n_layers)),
      size_entry("number_of_heads", true, FIELD(c.model.generator.n_heads)),
      size_entry("critic_number_of_heads", true, FIELD(c.model.critic.n_heads)),
      size_entry("sentence_max_length", true, FIELD(c.model.generator.max_len)),
      double_entry("test_split_ratio", true, FIELD(c.text.test_ratio)),
      size_entry("features_size", true, FIELD(c.model.generator.embed_dim)),
      size_entry("critic_features_size", true, FIELD(c.model.critic.embed_dim)),
      size_entry("d_model", true, FIELD(c.model.generator.d_model)),
      size_entry("critic_d_model", true, FIELD(c.model.critic.d_model)),
      size_entry("ff_dim", true, FIELD(c.model.generator.ff_dim)),
      size_entry("critic_ff_dim", true, FIELD(c.model.critic.ff_dim)),
      size_entry("vocab_size", true, FIELD(c.model.generator.vocab_size)),
      double_entry("gumbel_temperature", true, FIELD(c.model.generator.gumbel_temperature)),
      enum_entry<PositionalCombine>("positional_combine", FIELD(c.model.generator.positional_combine),
                                    {{PositionalCombine::add, "add"},
                                     {PositionalCombine::concat, "concat"}}),
      enum_entry<CriticFeed>("critic_feed", FIELD(c.model.generator.critic_feed),
                             {{CriticFeed::straight_through, "straight_through"},
                              {CriticFeed::soft, "soft"}}),
      enum_entry<CriticPooling>("critic_pooling", FIELD(c.model.critic.pooling),
                                {{CriticPooling::mean, "mean"},
                                 {CriticPooling::first_token, "first_token"}}),
      size_entry("critic_steps", true, FIELD(c.train.critic_steps)),
      double_entry("clip_c", true, FIELD(c.train.clip_c)),
      size_entry("seed", true, FIELD(c.train.seed)),
      size_entry("checkpoint_every", true, FIELD(c.train.checkpoint_every)),
      size_entry("eval_every", true, FIELD(c.train.eval_every)),
      {"allow_cold_start", true,
       [](const AppConfig& c) { return std::string(c.train.allow_cold_start ? "true" : "false"); },
       [](AppConfig& c, const std::string& k, const std::string& v) {
         c.train.allow_cold_start = parse_bool(k, v);
       }},
      size_entry("min_frequency", true, FIELD(c.text.min_frequency)),
      size_entry("max_vocab", true, FIELD(c.text.max_vocab)),
      string_entry("checkpoint", FIELD(c.runtime.checkpoint)),
      string_entry("host", FIELD(c.runtime.host)),
      size_entry("port", false, FIELD(c.runtime.port)),
      size_entry("max_sessions", false, FIELD(c.runtime.max_sessions)),
      size_entry("decode_cap", false, FIELD(c.runtime.decode_cap)),
      size_entry("request_timeout_ms", false, FIELD(c.runtime.request_timeout_ms)),
      string_entry("fallback_answer", FIELD(c.runtime.fallback_answer)),
      string_entry("transcript_path", FIELD(c.runtime.transcript_path)),
  };
  return table;
}

#undef FIELD

}  // namespace

void set_config_value(AppConfig& config, const std::string& key, const std::string& value) {
  for (const Entry& e : entries()) {
    if (key == e.key) {
      e.set(config, key, trim(value));
      return;
    }
  }
  throw ConfigError("config: unknown key '" + key + "'");
}

void apply_config_text(AppConfig& config, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    set_config_value(config, trim(std::string_view(stripped).substr(0, eq)),
                     trim(std::string_view(stripped).substr(eq + 1)));
  }
}

void apply_config_file(AppConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  apply_config_text(config, buf.str());
}

std::string dump_config(const AppConfig& config, ConfigScope scope) {
  std::string out;
  for (const Entry& e : entries()) {
    if (scope == ConfigScope::persisted && !e.persisted) continue;
    out += e.key;
    out += " = ";
    out += e.get(config);
    out += '\n';
  }
  return out;
}

void validate_config(const AppConfig& config) {
  const auto& g = config.model.generator;
  const auto& c = config.model.critic;
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("config: " + what);
  };
  require(g.n_layers > 0 && c.n_layers > 0, "number_of_layers must be positive");
  require(g.n_heads > 0 && c.n_heads > 0, "number_of_heads must be positive");
  require(g.max_len >= 3, "sentence_max_length must be at least 3");
  require(g.embed_dim > 0 && c.embed_dim > 0, "features_size must be positive");
  require(g.ff_dim > 0 && c.ff_dim > 0, "ff_dim must be positive");
  require(g.d_model % 2 == 0 && c.d_model % 2 == 0, "d_model must be even");
  const std::size_t g_width = g.positional_combine == PositionalCombine::concat ? g.d_model / 2 : g.d_model;
  require(g_width % 2 == 0 && g_width > 0, "positional width must be a positive even number");
  require(g.d_model % g.n_heads == 0, "d_model must be divisible by number_of_heads");
  require(c.d_model % c.n_heads == 0, "critic_d_model must be divisible by critic_number_of_heads");
  require(g.dropout >= 0 && g.dropout < 1 && c.dropout >= 0 && c.dropout < 1,
          "dropout must lie in [0, 1)");
  require(g.gumbel_temperature > 0, "gumbel_temperature must be positive");
  const auto& t = config.train;
  require(t.batch_size > 0, "batch_size must be positive");
  require(t.critic_steps > 0, "critic_steps must be positive");
  require(t.clip_c > 0, "clip_c must be positive");
  require(t.learning_rate > 0 && t.pretrain_learning_rate > 0, "learning rates must be positive");
  require(config.text.test_ratio >= 0 && config.text.test_ratio < 1, "test_split_ratio must lie in [0, 1)");
  require(config.text.max_vocab > 5, "max_vocab must exceed the reserved tokens");
  require(config.runtime.max_sessions > 0, "max_sessions must be positive");
}

}  // namespace cwgan
