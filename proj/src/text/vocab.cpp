#include "cwgan/text/vocab.hpp"

#include <algorithm>
#include <fstream>

namespace cwgan::text {

const std::vector<std::string>& reserved_tokens() {
  static const std::vector<std::string> names = {"<pad>", "<bos>", "<eos>", "<unk>", "<sep>"};
  return names;
}

Vocab::Vocab() : Vocab(from_tokens(reserved_tokens())) {}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  const auto& reserved = reserved_tokens();
  if (tokens.size() < reserved.size() || !std::equal(reserved.begin(), reserved.end(), tokens.begin())) {
    throw VocabError("vocabulary must start with the reserved tokens <pad> <bos> <eos> <unk> <sep>");
  }
  Vocab v{Empty{}};
  v.tokens_ = std::move(tokens);
  v.index_.reserve(v.tokens_.size());
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (v.tokens_[i].empty()) throw VocabError("vocabulary line " + std::to_string(i + 1) + " is empty");
    if (!v.index_.emplace(v.tokens_[i], static_cast<TokenId>(i)).second) {
      throw VocabError("duplicate vocabulary token '" + v.tokens_[i] + "'");
    }
  }
  return v;
}

Vocab Vocab::build(const std::vector<std::vector<std::string>>& sentences, std::size_t min_frequency,
                   std::size_t max_size) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& s : sentences)
    for (const auto& t : s) ++counts[t];
  const auto& reserved = reserved_tokens();
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [token, n] : counts) {
    if (n >= min_frequency && std::find(reserved.begin(), reserved.end(), token) == reserved.end()) {
      kept.emplace_back(token, n);
    }
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> tokens = reserved;
  for (auto& [token, n] : kept) {
    if (tokens.size() >= max_size) break;
    tokens.push_back(token);
  }
  return from_tokens(std::move(tokens));
}

TokenId Vocab::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw VocabError("token id " + std::to_string(id) + " outside vocabulary of " +
                     std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<TokenId> Vocab::encode(const std::vector<std::string>& tokens) const {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::vector<std::string> Vocab::decode(std::span<const TokenId> ids) const {
  std::vector<std::string> out;
  for (TokenId id : ids) {
    if (id == kEos) break;
    if (id == kPad || id == kBos || id == kSep) continue;
    out.push_back(token(id));
  }
  return out;
}

std::string Vocab::decode_text(std::span<const TokenId> ids) const { return detokenize(decode(ids)); }

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw VocabError("cannot write vocabulary " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw VocabError("cannot read vocabulary " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return from_tokens(std::move(tokens));
}

}  // namespace cwgan::text
