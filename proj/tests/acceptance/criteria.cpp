#include "acceptance/criteria.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <future>
#include <map>
#include <set>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "cwgan/metrics/metrics.hpp"
#include "cwgan/runtime/service.hpp"
#include "cwgan/train/checkpoint.hpp"
#include "cwgan/train/trainer.hpp"
#include "support/fixtures.hpp"
#include "support/metric_oracles.hpp"
#include "support/toy.hpp"
#include "support/models.hpp"

namespace cwgan::acceptance {

namespace {

using ad::Tensor;
namespace fx = ::cwgan::testing;
namespace mx = ::cwgan::testkit;
using text::TokenMatrix;

double elapsed(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

template <typename... Parts>
std::string cat(const Parts&... parts) {
  std::ostringstream s;
  (s << ... << parts);
  return s.str();
}

// Toy setting: vocab 20, 200 copy pairs, max_len 10, 2 layers, 2 heads, d_model 32.
constexpr std::size_t kVocab = 20, kPairs = 200, kMaxLen = 10;

AppConfig toy_config() {
  AppConfig c;
  auto& g = c.model.generator;
  g.vocab_size = kVocab;
  g.n_layers = 2;
  g.n_heads = 2;
  g.d_model = 32;
  g.embed_dim = 32;
  g.ff_dim = 64;
  g.max_len = kMaxLen;
  g.dropout = 0.1;
  auto& k = c.model.critic;
  k.n_layers = 2;
  k.n_heads = 2;
  k.d_model = 32;
  k.embed_dim = 32;
  k.ff_dim = 64;
  k.dropout = 0.1;
  c.train.batch_size = 16;
  c.train.pretrain_learning_rate = 0.002;
  c.text.min_frequency = 1;
  return c;
}

struct ToyRun {
  AppConfig config = toy_config();
  fx::ToyCorpus corpus = fx::copy_corpus(kVocab, kPairs, kMaxLen, 20240611);
  nn::Rng init{5489};
  std::unique_ptr<model::GeneratorModel> generator;
  std::unique_ptr<model::CriticModel> critic;
  train::TrainState state = train::make_train_state(5490);
  std::size_t epochs = 0;
  double accuracy = 0;
  double seconds = 0;
  bool trained = false;

  ToyRun() {
    generator = std::make_unique<model::GeneratorModel>(config.model.generator, init);
    critic = std::make_unique<model::CriticModel>(config.model.critic, kVocab, kMaxLen, init);
  }
};

double teacher_forced_accuracy(const model::GeneratorModel& gen, const std::vector<text::EncodedPair>& pairs) {
  ad::NoGradGuard no_grad;
  const text::Batch b = text::make_batch(pairs);
  return model::next_token_accuracy(gen.teacher_forced_logits(b.question, b.answer_in, {}), b.answer_target);
}

// Pretrains the shared toy model once, one epoch at a time, stopping at 95%.
ToyRun& toy() {
  static ToyRun run;
  if (run.trained) return run;
  const auto start = std::chrono::steady_clock::now();
  TrainConfig one = run.config.train;
  one.pretrain_epochs = 1;
  while (run.epochs < 200) {
    train::pretrain(*run.generator, run.corpus.encoded, one, run.state);
    ++run.epochs;
    run.accuracy = teacher_forced_accuracy(*run.generator, run.corpus.encoded);
    if (run.accuracy >= 0.95) break;
  }
  run.seconds = elapsed(start);
  run.trained = true;
  return run;
}

std::vector<std::vector<text::TokenId>> random_questions(std::mt19937_64& rng, std::size_t n) {
  std::vector<std::vector<text::TokenId>> out(n);
  for (auto& q : out) {
    q.resize(1 + rng() % (kMaxLen - 2));
    for (auto& id : q) id = static_cast<text::TokenId>(text::kReservedCount + rng() % (kVocab - text::kReservedCount));
  }
  return out;
}

Outcome positional_encoding() {
  const auto pe = nn::positional_encoding(30, 64);
  double worst = 0;
  bool bounded = true;
  for (std::size_t pos = 0; pos < 30; ++pos) {
    for (std::size_t i = 0; i < 32; ++i) {
      const double angle = static_cast<double>(pos) / std::pow(10000.0, 2.0 * i / 64.0);
      const double s = pe.table().at({pos, 2 * i}), c = pe.table().at({pos, 2 * i + 1});
      worst = std::max({worst, std::abs(s - std::sin(angle)), std::abs(c - std::cos(angle))});
      bounded &= s >= -1 && s <= 1 && c >= -1 && c <= 1;
    }
  }
  return {worst < 1e-6 && bounded, cat("30x64 table, max |diff| ", worst, bounded ? ", all in [-1, 1]" : ", out of range")};
}

Outcome causal_integrity() {
  nn::Rng init(77);
  const model::GeneratorModel gen(toy_config().model.generator, init);
  std::mt19937_64 rng(78);
  std::size_t broken = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto qs = random_questions(rng, 2);
    const TokenMatrix q = mx::wrapped(qs, kMaxLen);
    std::vector<std::vector<text::TokenId>> a = random_questions(rng, 2);
    for (auto& row : a) {
      row.insert(row.begin(), text::kBos);
      row.resize(kMaxLen, text::kPad);
    }
    const std::size_t t = rng() % (kMaxLen - 1);
    const Tensor before = gen.teacher_forced_logits(q, TokenMatrix::from_rows(a, kMaxLen), {}).clone();
    for (auto& row : a)
      for (std::size_t j = t + 1; j < kMaxLen; ++j)
        row[j] = static_cast<text::TokenId>(text::kReservedCount + rng() % (kVocab - text::kReservedCount));
    const Tensor after = gen.teacher_forced_logits(q, TokenMatrix::from_rows(a, kMaxLen), {});
    for (std::size_t b = 0; b < 2; ++b) {
      const std::size_t offset = b * kMaxLen * kVocab;
      if (std::memcmp(before.data().data() + offset, after.data().data() + offset, (t + 1) * kVocab * sizeof(Scalar)))
        ++broken;
    }
  }
  return {broken == 0, cat("50 trials, ", broken, " rows changed at or before the perturbation point")};
}

Outcome gumbel_head() {
  nn::Rng init(90);
  const auto config = toy_config();
  const model::GeneratorModel gen(config.model.generator, init);
  model::CriticModel critic(config.model.critic, kVocab, kMaxLen, init);
  std::mt19937_64 rng(91);
  const TokenMatrix q = mx::wrapped(random_questions(rng, 8), kMaxLen);

  double worst_sum = 0;
  double worst_onehot = 0;
  for (int trial = 0; trial < 5; ++trial) {
    nn::Rng noise(100 + trial);
    const auto roll = model::gumbel_generate(gen, q, noise, 1.0, {});
    const auto d = roll.soft.data();
    for (std::size_t r = 0; r < d.size() / kVocab; ++r) {
      double s = 0;
      for (std::size_t v = 0; v < kVocab; ++v) s += d[r * kVocab + v];
      worst_sum = std::max(worst_sum, std::abs(s - 1));
    }
    nn::Rng cold(200 + trial);
    const auto sharp = model::gumbel_generate(gen, q, cold, 1e-4, {});
    const auto e = sharp.soft.data();
    for (std::size_t r = 0; r < e.size() / kVocab; ++r) {
      double mx = 0;
      for (std::size_t v = 0; v < kVocab; ++v) mx = std::max<double>(mx, e[r * kVocab + v]);
      worst_onehot = std::max(worst_onehot, 1 - mx);
    }
  }

  // A fresh critic has a zero score head; give it random weights inside the clip box.
  mx::randomize(critic.parameters(), "", rng, -0.01, 0.01);
  const auto params = gen.parameters();
  std::vector<bool> reached(params.size(), false);
  int trials_with_all = 0;
  for (int trial = 0; trial < 10; ++trial) {
    ad::zero_grads(params);
    nn::Rng noise(300 + trial), drop(400 + trial);
    const nn::ForwardContext ctx{true, &drop};
    const auto roll = model::gumbel_generate(gen, q, noise, 1.0, ctx);
    const auto fake = model::make_fake_pairs(q, roll.hard, kMaxLen, roll.straight_through);
    ad::backward(model::generator_adv_loss(critic, fake, {}));
    bool all = true;
    for (std::size_t i = 0; i < params.size(); ++i) {
      bool nonzero = false;
      if (params[i].tensor.has_grad())
        for (Scalar g : params[i].tensor.grad()) nonzero |= g != 0;
      reached[i] = reached[i] || nonzero;
      all &= nonzero;
    }
    trials_with_all += all;
  }
  std::size_t missing = 0;
  std::string first_missing;
  for (std::size_t i = 0; i < params.size(); ++i)
    if (!reached[i]) {
      if (!missing) first_missing = params[i].name;
      ++missing;
    }
  const bool ok = worst_sum <= 1e-5 && worst_onehot <= 1e-3 && missing == 0;
  return {ok, cat("row sum err ", worst_sum, ", tau=1e-4 one-hot gap ", worst_onehot, ", ", params.size() - missing, "/",
                  params.size(), " generator tensors reached (", trials_with_all, "/10 trials reached all)",
                  missing ? ", first missing " + first_missing : "")};
}

Outcome toy_convergence() {
  auto& run = toy();
  return {run.accuracy >= 0.95 && run.epochs <= 200 && run.seconds < 600,
          cat("teacher-forced accuracy ", run.accuracy, " after ", run.epochs, " epochs in ", run.seconds, " s")};
}

struct AdversarialRun {
  bool done = false;
  std::vector<double> loss_g;
  std::size_t critic_records = 0;
  std::size_t non_finite = 0;
  std::size_t clip_breaches = 0;
  double worst_weight = 0;
  std::string error;
};

AdversarialRun& adversarial() {
  static AdversarialRun out;
  if (out.done) return out;
  out.done = true;
  auto& run = toy();
  TrainConfig cfg = run.config.train;
  cfg.critic_steps = 5;
  cfg.clip_c = 0.01;
  train::TrainHooks hooks;
  hooks.on_record = [&](const train::LossRecord& r) {
    for (const auto& v : {r.loss_g, r.loss_c})
      if (v && !std::isfinite(*v)) ++out.non_finite;
    if (r.loss_c) {
      ++out.critic_records;
      const double w = run.critic->max_abs_weight();
      out.worst_weight = std::max(out.worst_weight, w);
      if (w > 0.01) ++out.clip_breaches;
    }
    if (r.loss_g) out.loss_g.push_back(*r.loss_g);
  };
  try {
    train::AdversarialTrainer trainer(*run.generator, *run.critic, cfg, run.state);
    std::size_t budget = 100;
    while (budget > 0) budget -= trainer.run_epoch(run.corpus.encoded, hooks, budget);
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

Outcome adversarial_stability() {
  const auto& adv = adversarial();
  if (!adv.error.empty()) return {false, "adversarial run threw: " + adv.error};
  bool ok = adv.loss_g.size() == 100 && adv.critic_records == 500 && adv.non_finite == 0 && adv.clip_breaches == 0;

  std::ostringstream modes;
  for (auto mode : {train::TrainingMode::pretrain_only, train::TrainingMode::adversarial_only,
                    train::TrainingMode::combined}) {
    auto config = toy_config();
    config.train.pretrain_epochs = 1;
    config.train.adv_epochs = 1;
    config.train.critic_steps = 5;
    nn::Rng init(7);
    model::GeneratorModel gen(config.model.generator, init);
    model::CriticModel critic(config.model.critic, kVocab, kMaxLen, init);
    auto state = train::make_train_state(8);
    const auto& corpus = toy().corpus.encoded;
    const std::vector<text::EncodedPair> slice(corpus.begin(), corpus.begin() + 32);
    train::run_training({mode, 2}, gen, critic, slice, config.train, state);
    std::size_t pre = 0, adv_rows = 0;
    for (const auto& r : state.history) (r.phase == train::TrainPhase::pretrain ? pre : adv_rows)++;
    const bool mode_ok = (mode == train::TrainingMode::adversarial_only ? pre == 0 : pre > 0) &&
                         (mode == train::TrainingMode::pretrain_only ? adv_rows == 0 : adv_rows > 0);
    ok &= mode_ok;
    modes << ' ' << train::mode_name(mode) << (mode_ok ? " ok" : " WRONG");
  }
  return {ok, cat(adv.loss_g.size(), " generator / ", adv.critic_records, " critic steps, ", adv.non_finite,
                  " non-finite losses, max |critic weight| ", adv.worst_weight, ";", modes.str())};
}

Outcome loss_curve_shape() {
  const auto& adv = adversarial();
  if (adv.loss_g.empty()) return {false, "no adversarial losses recorded" + (adv.error.empty() ? "" : ": " + adv.error)};
  const double mx = *std::max_element(adv.loss_g.begin(), adv.loss_g.end());
  const std::size_t argmax = static_cast<std::size_t>(std::max_element(adv.loss_g.begin(), adv.loss_g.end()) - adv.loss_g.begin());
  return {adv.loss_g.front() < mx && adv.loss_g.back() < mx,
          cat("loss_g first ", adv.loss_g.front(), ", max ", mx, " at step ", argmax, ", last ", adv.loss_g.back())};
}

double oracle_f(const metrics::Tokens& c, const metrics::Tokens& r) {
  if (c.empty() || r.empty()) return 0;
  std::size_t overlap = 0;
  std::set<std::string> kinds(c.begin(), c.end());
  for (const auto& k : kinds)
    overlap += std::min(std::count(c.begin(), c.end(), k), std::count(r.begin(), r.end(), k));
  const double p = double(overlap) / c.size(), q = double(overlap) / r.size();
  return p + q > 0 ? 2 * p * q / (p + q) : 0;
}

double oracle_rouge(const metrics::Tokens& c, const metrics::Tokens& r) {
  if (c.empty() || r.empty()) return 0;
  const double l = static_cast<double>(fx::brute_lcs(c, r));
  const double p = l / c.size(), q = l / r.size();
  return p + q > 0 ? 2 * p * q / (p + q) : 0;
}

Outcome metric_oracles() {
  double worst = 0;
  for (const auto& f : fx::metric_fixtures()) {
    const auto c = text::tokenize(f.candidate), r = text::tokenize(f.reference);
    const auto s = metrics::score_sentence(c, r);
    for (double d : {s.bleu4 - f.bleu4, s.bleu4 - fx::naive_bleu4(c, r), s.rouge_l - f.rouge_l,
                     s.rouge_l - oracle_rouge(c, r), s.f_measure - f.f_measure, s.f_measure - oracle_f(c, r),
                     s.meteor - f.meteor})
      worst = std::max(worst, std::abs(d));
  }

  bool identical_ok = true;
  for (const char* sentence : {"where are you going tonight", "i do not know what you mean ."}) {
    const auto t = text::tokenize(sentence);
    const auto s = metrics::score_sentence(t, t);
    identical_ok &= std::abs(s.bleu4 - 1) < 1e-12 && s.rouge_l == 1 && s.f_measure == 1 && s.meteor >= 0.99;
  }

  std::mt19937_64 rng(4242);
  const metrics::Tokens words = {"i", "you", "go", "going", "went", "home", "homes", "the", "a", "now"};
  std::size_t out_of_range = 0;
  double worst_random = 0;
  for (int i = 0; i < 1000; ++i) {
    metrics::Tokens c(rng() % 12), r(1 + rng() % 12);
    for (auto& w : c) w = words[rng() % words.size()];
    for (auto& w : r) w = words[rng() % words.size()];
    const auto s = metrics::score_sentence(c, r);
    for (double v : {s.bleu4, s.rouge_l, s.f_measure, s.meteor}) out_of_range += !(v >= 0 && v <= 1);
    worst_random = std::max({worst_random, std::abs(s.bleu4 - fx::naive_bleu4(c, r)),
                             std::abs(s.rouge_l - oracle_rouge(c, r)), std::abs(s.f_measure - oracle_f(c, r))});
  }
  const bool ok = worst < 1e-9 && identical_ok && out_of_range == 0 && worst_random < 1e-9;
  return {ok, cat("fixture max |diff| ", worst, ", identical sentences ", identical_ok ? "score 1" : "WRONG",
                  ", 1000 random pairs: ", out_of_range, " out of [0,1], oracle max |diff| ", worst_random)};
}

Outcome parser_fixtures() {
  std::istringstream lines(fx::cornell_lines()), convs(fx::cornell_conversations());
  std::vector<text::DialoguePair> cornell;
  text::parse_cornell(lines, convs, [&](text::DialoguePair p) { cornell.push_back(std::move(p)); });
  std::istringstream chit(fx::chitchat_json());
  std::vector<text::DialoguePair> chitchat;
  text::parse_chitchat(chit, [&](text::DialoguePair p) { chitchat.push_back(std::move(p)); });

  std::vector<text::DialoguePair> pairs;
  for (int i = 0; i < 250; ++i) pairs.push_back({"q" + std::to_string(i), "a" + std::to_string(i)});
  const auto a = text::split_pairs(pairs, 0.2, 5489), b = text::split_pairs(pairs, 0.2, 5489);
  const auto other = text::split_pairs(pairs, 0.2, 5490);
  std::set<std::string> seen;
  for (const auto* part : {&a.train, &a.test})
    for (const auto& p : *part) seen.insert(p.question);
  const bool split_ok = a.test == b.test && a.train == b.train && a.test.size() == 50 && a.train.size() == 200 &&
                        seen.size() == 250 && other.test != a.test;
  const bool ok = cornell == fx::cornell_expected() && chitchat == fx::chitchat_expected() && split_ok;
  return {ok, cat("cornell ", cornell.size(), " pairs ", cornell == fx::cornell_expected() ? "exact" : "WRONG",
                  ", chit-chat ", chitchat.size(), " pairs ", chitchat == fx::chitchat_expected() ? "exact" : "WRONG",
                  ", split 250 -> ", a.train.size(), "/", a.test.size(), split_ok ? " deterministic" : " NOT deterministic")};
}

std::filesystem::path echo_checkpoint() {
  static const std::filesystem::path path = [] {
    auto& run = toy();
    const auto dir = std::filesystem::temp_directory_path() / "cwgan_acceptance";
    std::filesystem::create_directories(dir);
    const auto p = dir / "echo.ckpt";
    train::save_checkpoint(p, train::capture(run.config, run.corpus.vocab, *run.generator, run.critic.get(), &run.state));
    return p;
  }();
  return path;
}

Outcome checkpoint_round_trip() {
  auto& run = toy();
  const auto path = echo_checkpoint();
  const auto first = train::read_file(path);
  const auto loaded = train::load_checkpoint(path);
  const auto again = train::serialize_checkpoint(loaded.contents);
  train::TrainState restored;
  train::restore_state(loaded.contents.state, restored);
  const auto recaptured = train::serialize_checkpoint(
      train::capture(loaded.contents.config, loaded.contents.vocab, *loaded.generator, loaded.critic.get(), &restored));
  const bool bytes_ok = first == again && first == recaptured;

  std::mt19937_64 rng(5);
  const auto questions = random_questions(rng, 20);
  std::size_t same = 0;
  for (const auto& q : questions) {
    const auto wrapped = text::wrap_sequence(q, kMaxLen).ids;
    same += model::infer(*run.generator, wrapped, kMaxLen) == model::infer(*loaded.generator, wrapped, kMaxLen);
  }
  return {bytes_ok && same == 20, cat(first.size(), " bytes, save-load-save ", bytes_ok ? "identical" : "DIFFERENT",
                                      ", ", same, "/20 inferences identical")};
}

Outcome service_contract() {
  using json = nlohmann::json;
  RuntimeConfig rt;
  rt.max_sessions = 4;
  rt.decode_cap = kMaxLen;
  const auto engine = runtime::ChatEngine::load(echo_checkpoint(), rt);
  runtime::ChatService service(engine, rt);
  const int port = service.start("127.0.0.1", 0);
  std::vector<std::string> problems;
  auto expect = [&](bool cond, const std::string& what) {
    if (!cond) problems.push_back(what);
  };

  httplib::Client client("127.0.0.1", port);
  client.set_read_timeout(30, 0);
  if (auto r = client.Get("/health")) {
    const auto j = json::parse(r->body);
    expect(r->status == 200 && j["status"] == "ok" && j["checkpoint"] == engine->checkpoint_id(), "/health");
  } else {
    expect(false, "/health unreachable");
  }
  if (auto r = client.Get("/info")) expect(r->status == 200 && json::parse(r->body)["vocab_size"] == kVocab, "/info");
  else expect(false, "/info unreachable");
  if (auto r = client.Post("/chat", R"({"session_id": "s", "message": "t1 t2 t3"})", "application/json")) {
    const auto j = json::parse(r->body);
    expect(r->status == 200 && j.contains("answer") && j.contains("tokens") && j.contains("latency_ms"), "/chat body");
  } else {
    expect(false, "/chat unreachable");
  }
  auto status_of = [&](const std::string& body) {
    auto r = client.Post("/chat", body, "application/json");
    return r ? r->status : -1;
  };
  expect(status_of("{oops") == 400, "malformed JSON -> 400");
  expect(status_of(R"({"session_id": "s"})") == 400, "missing message -> 400");
  expect(status_of(json{{"message", std::string(kMaxLen * 8 + 1, 'x')}}.dump()) == 413, "oversize -> 413");
  service.begin_reload();
  expect(status_of(R"({"message": "t1"})") == 503, "reload -> 503");
  if (auto r = client.Get("/health")) expect(r->status == 503, "/health while reloading");
  service.finish_reload(engine);

  // 16 concurrent sessions against serial answers.
  auto& run = toy();
  std::vector<std::string> messages;
  for (std::size_t i = 0; i < 16; ++i) messages.push_back(run.corpus.pairs[i].question);
  std::vector<std::string> serial;
  for (const auto& m : messages) serial.push_back(engine->reply("serial", m).bot_text);
  std::vector<std::future<std::string>> futures;
  for (std::size_t i = 0; i < 16; ++i) {
    futures.push_back(std::async(std::launch::async, [&, i] {
      httplib::Client c("127.0.0.1", port);
      c.set_read_timeout(60, 0);
      auto r = c.Post("/chat", json{{"session_id", "s" + std::to_string(i)}, {"message", messages[i]}}.dump(),
                      "application/json");
      return r && r->status == 200 ? json::parse(r->body)["answer"].get<std::string>() : std::string("<failed>");
    }));
  }
  std::size_t matches = 0, echoes = 0;
  for (std::size_t i = 0; i < 16; ++i) {
    const auto got = futures[i].get();
    matches += got == serial[i];
    echoes += got == text::normalize(messages[i]);
  }
  expect(matches == 16, "concurrent answers differ from serial");

  const auto before = engine->weights_checksum();
  std::size_t ok_replies = 0;
  for (int i = 0; i < 1000; ++i) {
    auto r = client.Post("/chat", json{{"message", run.corpus.pairs[i % kPairs].question}}.dump(), "application/json");
    ok_replies += r && r->status == 200;
  }
  const bool stable = engine->weights_checksum() == before;
  expect(ok_replies == 1000, "not every one of 1000 requests succeeded");
  expect(stable, "weights changed while serving");
  service.stop();

  std::string detail = cat("16/16 concurrent ", matches == 16 ? "match serial" : "MISMATCH", " (", echoes,
                           "/16 exact echoes), ", ok_replies, "/1000 ok, checksum ", stable ? "unchanged" : "CHANGED");
  for (const auto& p : problems) detail += "; " + p;
  return {problems.empty(), detail};
}

}  // namespace

std::vector<Criterion> criteria() {
  return {
      {"positional-encoding", positional_encoding},
      {"causal-integrity", causal_integrity},
      {"gumbel-head", gumbel_head},
      {"toy-convergence", toy_convergence},
      {"adversarial-stability", adversarial_stability},
      {"loss-curve-shape", loss_curve_shape},
      {"metric-oracles", metric_oracles},
      {"parser-fixtures", parser_fixtures},
      {"checkpoint-round-trip", checkpoint_round_trip},
      {"service-contract", service_contract},
  };
}

}  // namespace cwgan::acceptance
