#include "cwgan/train/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace cwgan::inline CWGAN_PRECISION_NS::train {

const char* error_code_name(CheckpointErrorCode code) {
  switch (code) {
    case CheckpointErrorCode::io: return "io";
    case CheckpointErrorCode::bad_magic: return "bad_magic";
    case CheckpointErrorCode::bad_version: return "bad_version";
    case CheckpointErrorCode::bad_checksum: return "bad_checksum";
    case CheckpointErrorCode::malformed: return "malformed";
    case CheckpointErrorCode::incompatible: return "incompatible";
  }
  return "?";
}

CheckpointError::CheckpointError(CheckpointErrorCode code, const std::string& message)
    : std::runtime_error(std::string("checkpoint ") + error_code_name(code) + ": " + message), code_(code) {}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string checksum_hex(std::uint64_t checksum) {
  static const char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, checksum >>= 4) out[static_cast<std::size_t>(i)] = digits[checksum & 0xf];
  return out;
}

namespace {

constexpr char kMagic[4] = {'C', 'W', 'G', 'C'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw CheckpointError(CheckpointErrorCode::malformed, "unexpected end of data");
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::string state_text(const TrainSnapshot& s) {
  std::string out;
  out += "state_phase = " + std::string(phase_name(s.phase)) + "\n";
  out += "state_epoch = " + std::to_string(s.epoch) + "\n";
  out += "state_step = " + std::to_string(s.step) + "\n";
  out += "state_pretrained = " + std::string(s.pretrained ? "true" : "false") + "\n";
  out += "state_rng = " + s.rng_state + "\n";
  return out;
}

void parse_blob(const std::string& blob, CheckpointContents& out) {
  std::istringstream in(blob);
  std::string line, config_text;
  while (std::getline(in, line)) {
    if (line.rfind("state_", 0) != 0) {
      config_text += line + '\n';
      continue;
    }
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw CheckpointError(CheckpointErrorCode::malformed, "bad state line");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 3);
    try {
      if (key == "state_phase") out.state.phase = value == "adversarial" ? TrainPhase::adversarial : TrainPhase::pretrain;
      else if (key == "state_epoch") out.state.epoch = std::stoull(value);
      else if (key == "state_step") out.state.step = std::stoull(value);
      else if (key == "state_pretrained") out.state.pretrained = value == "true";
      else if (key == "state_rng") out.state.rng_state = value;
      else throw CheckpointError(CheckpointErrorCode::malformed, "unknown state key " + key);
    } catch (const std::logic_error&) {
      throw CheckpointError(CheckpointErrorCode::malformed, "bad value for " + key);
    }
  }
  try {
    apply_config_text(out.config, config_text);
  } catch (const ConfigError& e) {
    throw CheckpointError(CheckpointErrorCode::incompatible, e.what());
  }
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const CheckpointContents& c) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.str(dump_config(c.config, ConfigScope::persisted) + state_text(c.state));
  w.u32(static_cast<std::uint32_t>(c.vocab.size()));
  for (const auto& t : c.vocab.tokens()) w.str(t);
  w.u32(static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& t : c.tensors) {
    w.str(t.name);
    w.u32(static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) w.u32(d);
    for (float v : t.values) w.f32(v);
  }
  const std::uint64_t sum = fnv1a64(w.buffer());
  w.u64(sum);
  return std::move(w.buffer());
}

CheckpointContents parse_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CheckpointError(CheckpointErrorCode::bad_magic, "not a checkpoint file");
  }
  if (bytes.size() < 8) throw CheckpointError(CheckpointErrorCode::bad_checksum, "file truncated");
  const std::uint32_t version = Reader(bytes.subspan(4, 4)).u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError(CheckpointErrorCode::bad_version,
                          "format version " + std::to_string(version) + ", expected " + std::to_string(kCheckpointVersion));
  }
  if (bytes.size() < 16) throw CheckpointError(CheckpointErrorCode::bad_checksum, "file truncated");
  const auto body = bytes.first(bytes.size() - 8);
  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i) stored |= static_cast<std::uint64_t>(bytes[body.size() + static_cast<std::size_t>(i)]) << (8 * i);
  if (fnv1a64(body) != stored) throw CheckpointError(CheckpointErrorCode::bad_checksum, "content checksum mismatch");

  Reader r(body.subspan(8));
  CheckpointContents out;
  parse_blob(r.str(), out);
  std::vector<std::string> tokens(r.u32());
  for (auto& t : tokens) t = r.str();
  try {
    out.vocab = text::Vocab::from_tokens(std::move(tokens));
  } catch (const text::VocabError& e) {
    throw CheckpointError(CheckpointErrorCode::malformed, e.what());
  }
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    StoredTensor t;
    t.name = r.str();
    t.shape.resize(r.u32());
    std::size_t n = 1;
    for (auto& d : t.shape) {
      d = r.u32();
      n *= d;
    }
    if (n > body.size()) throw CheckpointError(CheckpointErrorCode::malformed, "tensor " + t.name + " larger than file");
    t.values.resize(n);
    for (auto& v : t.values) v = r.f32();
    out.tensors.push_back(std::move(t));
  }
  if (!r.done()) throw CheckpointError(CheckpointErrorCode::malformed, "trailing bytes before checksum");
  return out;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(CheckpointErrorCode::io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(CheckpointErrorCode::io, "write failed for " + path.string());
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointErrorCode::io, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

namespace {

void store(const ad::ParameterList& params, const std::string& prefix, std::vector<StoredTensor>& out) {
  for (const auto& p : params) {
    StoredTensor t;
    t.name = prefix + p.name;
    for (auto d : p.tensor.shape()) t.shape.push_back(static_cast<std::uint32_t>(d));
    for (Scalar v : p.tensor.data()) t.values.push_back(static_cast<float>(v));
    out.push_back(std::move(t));
  }
}

}  // namespace

CheckpointContents capture(const AppConfig& config, const text::Vocab& vocab, const GeneratorModel& generator,
                           const CriticModel* critic, const TrainState* state) {
  CheckpointContents c;
  c.config = config;
  c.config.runtime = RuntimeConfig{};
  c.config.model.generator = generator.config();
  if (critic) c.config.model.critic = critic->config();
  c.vocab = vocab;
  if (state) {
    c.state.phase = state->phase;
    c.state.epoch = state->epoch;
    c.state.step = state->step;
    c.state.pretrained = state->pretrained;
    std::ostringstream rng;
    rng << state->rng;
    c.state.rng_state = rng.str();
  }
  store(generator.parameters(), "generator.", c.tensors);
  if (critic) store(critic->parameters(), "critic.", c.tensors);
  return c;
}

std::string save_checkpoint(const std::filesystem::path& path, const CheckpointContents& contents) {
  const auto bytes = serialize_checkpoint(contents);
  write_file(path, bytes);
  return checksum_hex(fnv1a64(std::span(bytes).first(bytes.size() - 8)));
}

void restore_parameters(const ad::ParameterList& params, const std::vector<StoredTensor>& tensors,
                        const std::string& prefix) {
  std::size_t available = 0;
  for (const auto& t : tensors) available += t.name.rfind(prefix, 0) == 0;
  if (available != params.size()) {
    throw CheckpointError(CheckpointErrorCode::incompatible,
                          std::to_string(available) + " stored '" + prefix + "' tensors for " +
                              std::to_string(params.size()) + " model parameters");
  }
  for (const auto& p : params) {
    const std::string name = prefix + p.name;
    auto it = std::find_if(tensors.begin(), tensors.end(), [&](const StoredTensor& t) { return t.name == name; });
    if (it == tensors.end()) throw CheckpointError(CheckpointErrorCode::incompatible, "missing tensor " + name);
    const auto& shape = p.tensor.shape();
    bool same = it->shape.size() == shape.size();
    for (std::size_t i = 0; same && i < shape.size(); ++i) same = it->shape[i] == shape[i];
    if (!same) throw CheckpointError(CheckpointErrorCode::incompatible, "shape mismatch for " + name);
    Tensor dst = p.tensor;
    auto data = dst.data();
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<Scalar>(it->values[i]);
  }
}

LoadedCheckpoint load_checkpoint_bytes(std::span<const std::uint8_t> bytes) {
  LoadedCheckpoint out;
  out.contents = parse_checkpoint(bytes);
  out.id = checksum_hex(fnv1a64(bytes.first(bytes.size() - 8)));
  const auto& c = out.contents;
  GeneratorConfig gc = c.config.model.generator;
  if (gc.vocab_size != c.vocab.size()) {
    throw CheckpointError(CheckpointErrorCode::incompatible,
                          "vocab_size " + std::to_string(gc.vocab_size) + " but vocabulary holds " +
                              std::to_string(c.vocab.size()) + " tokens");
  }
  nn::Rng rng(0);
  try {
    validate_config(c.config);
    out.generator = std::make_shared<GeneratorModel>(gc, rng);
  } catch (const std::exception& e) {
    throw CheckpointError(CheckpointErrorCode::incompatible, e.what());
  }
  restore_parameters(out.generator->parameters(), c.tensors, "generator.");
  const bool has_critic = std::any_of(c.tensors.begin(), c.tensors.end(),
                                      [](const StoredTensor& t) { return t.name.rfind("critic.", 0) == 0; });
  if (has_critic) {
    out.critic = std::make_shared<CriticModel>(c.config.model.critic, gc.vocab_size, gc.max_len, rng);
    restore_parameters(out.critic->parameters(), c.tensors, "critic.");
  }
  return out;
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return load_checkpoint_bytes(bytes);
}

void restore_state(const TrainSnapshot& snapshot, TrainState& state) {
  state.phase = snapshot.phase;
  state.epoch = snapshot.epoch;
  state.step = snapshot.step;
  state.pretrained = snapshot.pretrained;
  if (!snapshot.rng_state.empty()) {
    std::istringstream in(snapshot.rng_state);
    in >> state.rng;
    if (!in) throw CheckpointError(CheckpointErrorCode::malformed, "unreadable rng state");
  }
}

}  // namespace cwgan::inline CWGAN_PRECISION_NS::train
