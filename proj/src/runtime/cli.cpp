#include "cwgan/runtime/cli.hpp"

#include <csignal>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "cwgan/metrics/metrics.hpp"
#include "cwgan/runtime/chat.hpp"
#include "cwgan/runtime/service.hpp"
#include "cwgan/text/batching.hpp"
#include "cwgan/text/corpus.hpp"
#include "cwgan/train/checkpoint.hpp"
#include "cwgan/train/evaluate.hpp"
#include "cwgan/train/trainer.hpp"

namespace cwgan::runtime {

namespace fs = std::filesystem;

namespace {

struct GlobalOptions {
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  bool print_config = false;
};

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw CliError(kExitUsage, std::string(what) + " path is required");
  if (!fs::exists(path)) throw CliError(kExitMissingFile, std::string(what) + " not found: " + path);
}

void apply_overrides(AppConfig& config, const GlobalOptions& g) {
  if (!g.config_file.empty()) {
    require_file(g.config_file, "config file");
    apply_config_file(config, g.config_file);
  }
  for (const auto& kv : g.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.seed) config.train.seed = *g.seed;
}

AppConfig user_config(const GlobalOptions& g) {
  AppConfig config;
  apply_overrides(config, g);
  return config;
}

// Checkpoint settings first, user overrides on top; the model section must survive unchanged.
AppConfig merged_config(const AppConfig& stored, const GlobalOptions& g) {
  AppConfig merged = stored;
  apply_overrides(merged, g);
  AppConfig a = stored, b = merged;
  a.train = b.train;
  a.text = b.text;
  a.runtime = b.runtime;
  if (dump_config(a, ConfigScope::persisted) != dump_config(b, ConfigScope::persisted)) {
    throw CliError(kExitIncompatible, "model settings given on the command line differ from the checkpoint");
  }
  return merged;
}

train::LoadedCheckpoint load(const std::string& path) {
  require_file(path, "checkpoint");
  return train::load_checkpoint(path);
}

std::vector<text::EncodedPair> encode_all(const std::vector<text::DialoguePair>& pairs, const text::Vocab& vocab,
                                          std::size_t max_len) {
  std::vector<text::EncodedPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(text::encode_pair(p, vocab, max_len));
  return out;
}

std::vector<text::DialoguePair> read_pairs(const std::string& path, const char* what) {
  require_file(path, what);
  auto pairs = text::read_jsonl(fs::path(path));
  if (pairs.empty()) throw CliError(kExitFailure, std::string(what) + " holds no pairs: " + path);
  return pairs;
}

// Periodic checkpoint, optional evaluation and a per-epoch summary line.
train::TrainHooks progress_hooks(std::ostream& out, const AppConfig& config, const text::Vocab& vocab,
                                 model::GeneratorModel& generator, model::CriticModel& critic,
                                 const std::string& checkpoint_path, const std::vector<text::DialoguePair>* test) {
  train::TrainHooks hooks;
  auto last_g = std::make_shared<double>(0.0);
  auto last_c = std::make_shared<double>(0.0);
  hooks.on_record = [last_g, last_c](const train::LossRecord& r) {
    if (r.loss_g) *last_g = *r.loss_g;
    if (r.loss_c) *last_c = *r.loss_c;
  };
  hooks.on_epoch_end = [&out, &config, &vocab, &generator, &critic, checkpoint_path, test, last_g, last_c](
                           train::TrainPhase phase, std::size_t epoch, const train::TrainState& state) {
    out << train::phase_name(phase) << " epoch " << epoch << " loss_g " << *last_g;
    if (phase == train::TrainPhase::adversarial) out << " loss_c " << *last_c;
    out << '\n';
    const auto& t = config.train;
    if (t.checkpoint_every > 0 && epoch % t.checkpoint_every == 0 && !checkpoint_path.empty()) {
      train::save_checkpoint(checkpoint_path, train::capture(config, vocab, generator, &critic, &state));
    }
    if (test && t.eval_every > 0 && epoch % t.eval_every == 0) {
      const auto report = train::evaluate_generator(generator, vocab, *test);
      out << "  eval bleu4 " << report.bleu4 << " rouge_l " << report.rouge_l << " f " << report.f_measure
          << " meteor " << report.meteor << '\n';
    }
  };
  return hooks;
}

volatile std::sig_atomic_t g_stop_requested = 0;

}  // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Conditional Wasserstein GAN chatbot: data preparation, training, evaluation and serving"};
  app.name("cwgan");
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--config", g.config_file, "Flat key = value configuration file");
  app.add_option("--set", g.sets, "Override one configuration key (key=value); repeatable");
  app.add_option("--seed", g.seed, "Random seed for every stage");
  app.add_flag("--print-config", g.print_config, "Print the effective configuration and exit");

  // prepare-data
  auto* prepare = app.add_subcommand("prepare-data", "Parse a corpus into normalized train/test pair files");
  std::string format, lines_path, conversations_path, input_path, out_dir;
  prepare->add_option("--format", format, "cornell | chitchat | jsonl")->required()
      ->check(CLI::IsMember({"cornell", "chitchat", "jsonl"}));
  prepare->add_option("--lines", lines_path, "Cornell movie lines file");
  prepare->add_option("--conversations", conversations_path, "Cornell conversations file");
  prepare->add_option("--input", input_path, "Chit-Chat JSON or pair JSONL file");
  prepare->add_option("--out-dir", out_dir, "Directory for pairs.jsonl, train.jsonl, test.jsonl")->required();

  // build-vocab
  auto* vocab_cmd = app.add_subcommand("build-vocab", "Build the vocabulary from training pairs");
  std::string train_path, vocab_path, vocab_out;
  vocab_cmd->add_option("--train", train_path, "Training pairs (JSONL)")->required();
  vocab_cmd->add_option("--out", vocab_out, "Vocabulary file to write")->required();

  // pretrain
  auto* pretrain_cmd = app.add_subcommand("pretrain", "MLE pretraining of the generator");
  std::string ckpt_out, history_path, test_path;
  pretrain_cmd->add_option("--train", train_path, "Training pairs (JSONL)")->required();
  pretrain_cmd->add_option("--vocab", vocab_path, "Vocabulary file")->required();
  pretrain_cmd->add_option("--out", ckpt_out, "Checkpoint to write")->required();
  pretrain_cmd->add_option("--history", history_path, "Loss history CSV");
  pretrain_cmd->add_option("--test", test_path, "Test pairs for periodic evaluation");

  // train-adv
  auto* adv_cmd = app.add_subcommand("train-adv", "Adversarial fine-tuning with the critic");
  std::string ckpt_in;
  bool cold_start = false;
  std::size_t max_steps = 0;
  adv_cmd->add_option("--checkpoint", ckpt_in, "Pretrained checkpoint");
  adv_cmd->add_option("--train", train_path, "Training pairs (JSONL)")->required();
  adv_cmd->add_option("--vocab", vocab_path, "Vocabulary file (cold start only)");
  adv_cmd->add_option("--out", ckpt_out, "Checkpoint to write")->required();
  adv_cmd->add_option("--history", history_path, "Loss history CSV");
  adv_cmd->add_option("--test", test_path, "Test pairs for periodic evaluation");
  adv_cmd->add_option("--max-steps", max_steps, "Stop after this many generator updates (0 = no limit)");
  adv_cmd->add_flag("--allow-cold-start", cold_start, "Train adversarially without pretraining");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Score greedy answers on test pairs");
  std::string report_path, csv_path, corpus_name = "test";
  eval_cmd->add_option("--checkpoint", ckpt_in, "Checkpoint")->required();
  eval_cmd->add_option("--test", test_path, "Test pairs (JSONL)")->required();
  eval_cmd->add_option("--out", report_path, "Metric report JSON (default: report.json)");
  eval_cmd->add_option("--csv", csv_path, "Per-sentence scores CSV");
  eval_cmd->add_option("--corpus", corpus_name, "Corpus label in the report");

  // chat
  auto* chat_cmd = app.add_subcommand("chat", "Interactive chat on standard input");
  std::string transcript_path, session_id = "repl";
  chat_cmd->add_option("--checkpoint", ckpt_in, "Checkpoint")->required();
  chat_cmd->add_option("--transcript", transcript_path, "Append turns to this JSONL file");
  chat_cmd->add_option("--session", session_id, "Session id recorded in the transcript");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "HTTP chat service");
  std::optional<std::string> host;
  std::optional<int> port;
  serve_cmd->add_option("--checkpoint", ckpt_in, "Checkpoint");
  serve_cmd->add_option("--host", host, "Bind address");
  serve_cmd->add_option("--port", port, "Port");
  serve_cmd->add_option("--transcript", transcript_path, "Append turns to this JSONL file");

  std::vector<const char*> argv{"cwgan"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (g.print_config) {
      AppConfig config = user_config(g);
      if (!ckpt_in.empty()) config = merged_config(load(ckpt_in).contents.config, g);
      out << dump_config(config);
      return kExitOk;
    }

    if (prepare->parsed()) {
      AppConfig config = user_config(g);
      std::vector<text::DialoguePair> pairs;
      const text::PairSink sink = [&](text::DialoguePair p) { pairs.push_back(std::move(p)); };
      if (format == "cornell") {
        require_file(lines_path, "lines file");
        require_file(conversations_path, "conversations file");
        const auto stats = text::parse_cornell(fs::path(lines_path), fs::path(conversations_path), sink);
        out << "cornell: " << stats.lines_parsed << " lines, " << stats.conversations << " conversations, "
            << stats.pairs << " pairs\n";
      } else if (format == "chitchat") {
        require_file(input_path, "input file");
        const auto stats = text::parse_chitchat(fs::path(input_path), sink);
        out << "chitchat: " << stats.conversations << " conversations, " << stats.messages << " messages, "
            << stats.pairs << " pairs\n";
      } else {
        pairs = read_pairs(input_path, "input file");
      }
      fs::create_directories(out_dir);
      const auto split = text::split_pairs(pairs, config.text.test_ratio, config.train.seed);
      text::write_jsonl(fs::path(out_dir) / "pairs.jsonl", pairs);
      text::write_jsonl(fs::path(out_dir) / "train.jsonl", split.train);
      text::write_jsonl(fs::path(out_dir) / "test.jsonl", split.test);
      out << "train " << split.train.size() << " / test " << split.test.size() << " pairs written to " << out_dir
          << '\n';
      return kExitOk;
    }

    if (vocab_cmd->parsed()) {
      AppConfig config = user_config(g);
      const auto pairs = read_pairs(train_path, "training pairs");
      const auto vocab =
          text::Vocab::build(text::tokenized_sides(pairs), config.text.min_frequency, config.text.max_vocab);
      vocab.save(vocab_out);
      out << "vocabulary of " << vocab.size() << " tokens written to " << vocab_out << '\n';
      return kExitOk;
    }

    if (pretrain_cmd->parsed()) {
      AppConfig config = user_config(g);
      const auto pairs = read_pairs(train_path, "training pairs");
      require_file(vocab_path, "vocabulary");
      const auto vocab = text::Vocab::load(vocab_path);
      config.model.generator.vocab_size = vocab.size();
      validate_config(config);
      std::vector<text::DialoguePair> test;
      if (!test_path.empty()) test = read_pairs(test_path, "test pairs");

      nn::Rng init(config.train.seed);
      model::GeneratorModel generator(config.model.generator, init);
      model::CriticModel critic(config.model.critic, vocab.size(), config.model.generator.max_len, init);
      train::TrainState state = train::make_train_state(config.train.seed + 1);
      const auto corpus = encode_all(pairs, vocab, config.model.generator.max_len);
      const auto hooks = progress_hooks(out, config, vocab, generator, critic, ckpt_out, test.empty() ? nullptr : &test);
      train::pretrain(generator, corpus, config.train, state, hooks);
      const auto id = train::save_checkpoint(ckpt_out, train::capture(config, vocab, generator, &critic, &state));
      if (!history_path.empty()) train::write_history_csv(fs::path(history_path), state.history);
      out << "checkpoint " << id << " written to " << ckpt_out << '\n';
      return kExitOk;
    }

    if (adv_cmd->parsed()) {
      const auto pairs = read_pairs(train_path, "training pairs");
      std::vector<text::DialoguePair> test;
      if (!test_path.empty()) test = read_pairs(test_path, "test pairs");
      AppConfig config;
      text::Vocab vocab;
      std::shared_ptr<model::GeneratorModel> generator;
      std::shared_ptr<model::CriticModel> critic;
      train::TrainState state;

      if (ckpt_in.empty()) {
        if (!cold_start) {
          throw CliError(kExitIncompatible,
                         "train-adv needs a pretrained --checkpoint; pass --allow-cold-start to skip pretraining");
        }
        config = user_config(g);
        require_file(vocab_path, "vocabulary");
        vocab = text::Vocab::load(vocab_path);
        config.model.generator.vocab_size = vocab.size();
        validate_config(config);
        nn::Rng init(config.train.seed);
        generator = std::make_shared<model::GeneratorModel>(config.model.generator, init);
        critic = std::make_shared<model::CriticModel>(config.model.critic, vocab.size(),
                                                      config.model.generator.max_len, init);
        state = train::make_train_state(config.train.seed + 1);
      } else {
        auto loaded = load(ckpt_in);
        config = merged_config(loaded.contents.config, g);
        vocab = loaded.contents.vocab;
        generator = loaded.generator;
        critic = loaded.critic;
        if (!critic) {
          nn::Rng init(config.train.seed);
          critic = std::make_shared<model::CriticModel>(config.model.critic, vocab.size(),
                                                        config.model.generator.max_len, init);
        }
        state = train::make_train_state(config.train.seed + 1);
        train::restore_state(loaded.contents.state, state);
      }
      if (cold_start) config.train.allow_cold_start = true;

      const auto corpus = encode_all(pairs, vocab, config.model.generator.max_len);
      const auto hooks = progress_hooks(out, config, vocab, *generator, *critic, ckpt_out, test.empty() ? nullptr : &test);
      train::AdversarialTrainer trainer(*generator, *critic, config.train, state);
      std::size_t budget = max_steps == 0 ? std::numeric_limits<std::size_t>::max() : max_steps;
      for (std::size_t e = 0; e < config.train.adv_epochs && budget > 0; ++e) {
        budget -= trainer.run_epoch(corpus, hooks, budget);
      }
      const auto id = train::save_checkpoint(ckpt_out, train::capture(config, vocab, *generator, critic.get(), &state));
      if (!history_path.empty()) train::write_history_csv(fs::path(history_path), state.history);
      out << "checkpoint " << id << " written to " << ckpt_out << '\n';
      return kExitOk;
    }

    if (eval_cmd->parsed()) {
      auto loaded = load(ckpt_in);
      merged_config(loaded.contents.config, g);
      const auto test = read_pairs(test_path, "test pairs");
      const auto report = train::evaluate_generator(*loaded.generator, loaded.contents.vocab, test, corpus_name);
      if (report_path.empty()) report_path = "report.json";
      metrics::write_report(report, report_path);
      if (!csv_path.empty()) metrics::write_sentence_csv(report, csv_path);
      out << metrics::report_json(report) << '\n';
      return kExitOk;
    }

    if (chat_cmd->parsed()) {
      auto loaded = load(ckpt_in);
      AppConfig config = merged_config(loaded.contents.config, g);
      if (!transcript_path.empty()) config.runtime.transcript_path = transcript_path;
      ChatEngine engine(loaded.generator, loaded.contents.vocab, loaded.id, config);
      std::unique_ptr<TranscriptWriter> transcript;
      if (!config.runtime.transcript_path.empty())
        transcript = std::make_unique<TranscriptWriter>(config.runtime.transcript_path);
      chat_repl(engine, in, out, transcript.get(), session_id);
      return kExitOk;
    }

    if (serve_cmd->parsed()) {
      AppConfig user = user_config(g);
      if (ckpt_in.empty()) ckpt_in = user.runtime.checkpoint;
      auto loaded = load(ckpt_in);
      AppConfig config = merged_config(loaded.contents.config, g);
      if (host) config.runtime.host = *host;
      if (port) config.runtime.port = *port;
      if (!transcript_path.empty()) config.runtime.transcript_path = transcript_path;
      validate_config(config);
      auto engine = std::make_shared<const ChatEngine>(loaded.generator, loaded.contents.vocab, loaded.id, config);
      std::shared_ptr<TranscriptWriter> transcript;
      if (!config.runtime.transcript_path.empty())
        transcript = std::make_shared<TranscriptWriter>(config.runtime.transcript_path);
      ChatService service(engine, config.runtime, transcript);
      const int bound = service.start(config.runtime.host, config.runtime.port);
      out << "serving checkpoint " << loaded.id << " on http://" << config.runtime.host << ':' << bound << '\n'
          << std::flush;
      std::signal(SIGINT, [](int) { g_stop_requested = 1; });
      std::signal(SIGTERM, [](int) { g_stop_requested = 1; });
      while (!g_stop_requested) std::this_thread::sleep_for(std::chrono::milliseconds(200));
      service.stop();
      return kExitOk;
    }

    out << app.help();
    return kExitUsage;
  } catch (const CliError& e) {
    err << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const train::CheckpointError& e) {
    err << "error: " << e.what() << '\n';
    return e.code() == train::CheckpointErrorCode::io ? kExitMissingFile : kExitIncompatible;
  } catch (const train::PhaseOrderError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIncompatible;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cin, std::cout, std::cerr);
}

}  // namespace cwgan::runtime
