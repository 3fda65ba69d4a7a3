#include <doctest.h>

#include <filesystem>

#include "cwgan/train/checkpoint.hpp"
#include "support/models.hpp"
#include "support/toy.hpp"

using namespace cwgan;
using namespace cwgan::testing;
using namespace cwgan::testkit;
using namespace cwgan::train;

namespace {

struct Fixture {
  AppConfig config;
  ToyCorpus toy = copy_corpus(12, 4, 6, 1);
  nn::Rng init{7};
  std::unique_ptr<model::GeneratorModel> gen;
  std::unique_ptr<model::CriticModel> critic;
  TrainState state = make_train_state(11);

  Fixture() {
    config.model.generator = tiny_generator(12, 6);
    config.model.critic = tiny_critic();
    gen = std::make_unique<model::GeneratorModel>(config.model.generator, init);
    critic = std::make_unique<model::CriticModel>(config.model.critic, 12, 6, init);
    state.epoch = 3;
    state.step = 17;
    state.pretrained = true;
    state.rng.discard(5);
  }
  CheckpointContents contents() const { return capture(config, toy.vocab, *gen, critic.get(), &state); }
};

std::filesystem::path temp_file(const char* name) { return std::filesystem::temp_directory_path() / name; }

}  // namespace

TEST_CASE("fnv1a64 reference values") {
  CHECK(fnv1a64({}) == 0xcbf29ce484222325ull);
  const std::uint8_t a[] = {'a'};
  CHECK(fnv1a64(a) == 0xaf63dc4c8601ec8cull);
  CHECK(checksum_hex(0xabcull) == "0000000000000abc");
}

TEST_CASE("serialize, parse, serialize is byte-identical") {
  Fixture f;
  const auto bytes = serialize_checkpoint(f.contents());
  const auto again = serialize_checkpoint(parse_checkpoint(bytes));
  CHECK(bytes == again);
}

TEST_CASE("load restores weights, vocab, config and state") {
  Fixture f;
  const auto path = temp_file("cwgan_ckpt_test.bin");
  const std::string id = save_checkpoint(path, f.contents());
  const auto loaded = load_checkpoint(path);
  CHECK(loaded.id == id);
  CHECK(loaded.contents.vocab == f.toy.vocab);
  CHECK(dump_config(loaded.contents.config, ConfigScope::persisted) == dump_config(f.config, ConfigScope::persisted));
  REQUIRE(loaded.critic);
  const auto a = f.gen->parameters(), b = loaded.generator->parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    CHECK(std::equal(a[i].tensor.data().begin(), a[i].tensor.data().end(), b[i].tensor.data().begin()));
  }
  const auto q = wrapped({{5, 6, 7}}, 6);
  CHECK(model::infer(*f.gen, q, 6) == model::infer(*loaded.generator, q, 6));

  TrainState restored;
  restore_state(loaded.contents.state, restored);
  CHECK(restored.epoch == 3);
  CHECK(restored.step == 17);
  CHECK(restored.pretrained);
  CHECK(restored.rng() == f.state.rng());
  std::filesystem::remove(path);
}

TEST_CASE("generator-only checkpoints load without a critic") {
  Fixture f;
  const auto loaded = load_checkpoint_bytes(serialize_checkpoint(capture(f.config, f.toy.vocab, *f.gen, nullptr, nullptr)));
  CHECK_FALSE(loaded.critic);
}

TEST_CASE("corruption is classified") {
  Fixture f;
  const auto bytes = serialize_checkpoint(f.contents());
  auto code_of = [](std::vector<std::uint8_t> b) {
    try {
      parse_checkpoint(b);
    } catch (const CheckpointError& e) {
      return e.code();
    }
    FAIL("no error");
    return CheckpointErrorCode::io;
  };
  auto magic = bytes;
  magic[0] = 'X';
  CHECK(code_of(magic) == CheckpointErrorCode::bad_magic);
  auto version = bytes;
  version[4] = 9;
  CHECK(code_of(version) == CheckpointErrorCode::bad_version);
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x40;
  CHECK(code_of(flipped) == CheckpointErrorCode::bad_checksum);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 30);
  CHECK(code_of(truncated) == CheckpointErrorCode::bad_checksum);
  CHECK(code_of({'C', 'W', 'G', 'C'}) != CheckpointErrorCode::io);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/ckpt.bin"), CheckpointError);
}

TEST_CASE("shape mismatches are incompatible") {
  Fixture f;
  auto contents = f.contents();
  contents.tensors.front().shape.back() += 1;
  contents.tensors.front().values.resize(contents.tensors.front().values.size() + contents.tensors.front().shape.front());
  try {
    load_checkpoint_bytes(serialize_checkpoint(contents));
    FAIL("expected incompatible");
  } catch (const CheckpointError& e) {
    CHECK(e.code() == CheckpointErrorCode::incompatible);
  }
  auto missing = f.contents();
  missing.tensors.pop_back();
  CHECK_THROWS_AS(load_checkpoint_bytes(serialize_checkpoint(missing)), CheckpointError);
}
