#include "cwgan/text/corpus.hpp"

#include <fstream>
#include <iostream>
#include <unordered_map>

#include <json.hpp>

#include "cwgan/text/tokenizer.hpp"

namespace cwgan::text {

namespace {

using json = nlohmann::json;

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(kCornellDelimiter, start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + kCornellDelimiter.size();
  }
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

// "['L194', 'L195', 'L196']" -> {L194, L195, L196}; false on malformed text.
bool parse_line_list(const std::string& text, std::vector<std::string>& out) {
  const auto open = text.find('[');
  const auto close = text.rfind(']');
  if (open == std::string::npos || close == std::string::npos || close < open) return false;
  std::size_t i = open + 1;
  while (i < close) {
    const char c = text[i];
    if (c == ' ' || c == ',') {
      ++i;
      continue;
    }
    if (c != '\'' && c != '"') return false;
    const auto end = text.find(c, i + 1);
    if (end == std::string::npos || end > close) return false;
    out.push_back(text.substr(i + 1, end - i - 1));
    i = end + 1;
  }
  return true;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot open " + path.string());
  return in;
}

void emit_pairs(const std::vector<std::string>& turns, const PairSink& sink, std::size_t& pairs,
                std::size_t* empty) {
  for (std::size_t i = 0; i + 1 < turns.size(); ++i) {
    if (normalize(turns[i]).empty() || normalize(turns[i + 1]).empty()) {
      if (empty) ++*empty;
      continue;
    }
    sink({turns[i], turns[i + 1]});
    ++pairs;
  }
}

}  // namespace

CornellStats parse_cornell(std::istream& lines, std::istream& conversations, const PairSink& sink) {
  CornellStats stats;
  std::unordered_map<std::string, std::string> utterances;
  std::string row;
  while (std::getline(lines, row)) {
    strip_cr(row);
    if (row.empty()) continue;
    auto fields = split_fields(row);
    if (fields.size() != 5 || fields[0].empty()) {
      ++stats.malformed_rows;
      continue;
    }
    utterances[fields[0]] = std::move(fields[4]);
    ++stats.lines_parsed;
  }
  while (std::getline(conversations, row)) {
    strip_cr(row);
    if (row.empty()) continue;
    const auto fields = split_fields(row);
    std::vector<std::string> ids;
    if (fields.size() != 4 || !parse_line_list(fields[3], ids)) {
      ++stats.malformed_rows;
      continue;
    }
    ++stats.conversations;
    // A dangling reference breaks the chain: pairs never straddle it.
    std::vector<std::string> run;
    for (const auto& id : ids) {
      auto it = utterances.find(id);
      if (it == utterances.end()) {
        ++stats.missing_references;
        emit_pairs(run, sink, stats.pairs, &stats.empty_pairs);
        run.clear();
        continue;
      }
      run.push_back(it->second);
    }
    emit_pairs(run, sink, stats.pairs, &stats.empty_pairs);
  }
  if (stats.malformed_rows || stats.missing_references) {
    std::cerr << "cornell: skipped " << stats.malformed_rows << " malformed rows and "
              << stats.missing_references << " missing line references\n";
  }
  return stats;
}

CornellStats parse_cornell(const std::filesystem::path& lines_path,
                           const std::filesystem::path& conversations_path, const PairSink& sink) {
  auto lines = open_input(lines_path);
  auto conversations = open_input(conversations_path);
  return parse_cornell(lines, conversations, sink);
}

ChitChatStats parse_chitchat(std::istream& in, const PairSink& sink) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw CorpusError(std::string("chit-chat: unparseable JSON: ") + e.what());
  }
  if (!doc.is_object()) throw CorpusError("chit-chat: top level must be an object of conversations");

  ChitChatStats stats;
  for (const auto& [id, convo] : doc.items()) {
    ++stats.conversations;
    const json* messages = nullptr;
    if (convo.is_object() && convo.contains("messages")) messages = &convo["messages"];
    else if (convo.is_array()) messages = &convo;
    if (!messages || !messages->is_array()) throw CorpusError("chit-chat: conversation " + id + " has no messages array");

    std::vector<std::string> turns;
    std::string last_sender;
    auto add = [&](const json& m) {
      if (!m.is_object() || !m.contains("text") || !m["text"].is_string()) {
        throw CorpusError("chit-chat: conversation " + id + " has a message without text");
      }
      const std::string text = m["text"].get<std::string>();
      const std::string sender = m.contains("sender") && m["sender"].is_string() ? m["sender"].get<std::string>() : "";
      ++stats.messages;
      if (normalize(text).empty()) return;
      if (!turns.empty() && sender == last_sender) {
        turns.back() += ' ';
        turns.back() += text;
      } else {
        turns.push_back(text);
        last_sender = sender;
      }
    };
    for (const auto& entry : *messages) {
      if (entry.is_array()) {
        for (const auto& m : entry) add(m);
      } else {
        add(entry);
      }
    }
    if (turns.empty()) {
      ++stats.empty_conversations;
      continue;
    }
    stats.turns += turns.size();
    emit_pairs(turns, sink, stats.pairs, nullptr);
  }
  return stats;
}

ChitChatStats parse_chitchat(const std::filesystem::path& path, const PairSink& sink) {
  auto in = open_input(path);
  return parse_chitchat(in, sink);
}

void write_jsonl(std::ostream& out, const std::vector<DialoguePair>& pairs) {
  for (const auto& p : pairs) out << json{{"q", p.question}, {"a", p.answer}}.dump() << '\n';
}

void write_jsonl(const std::filesystem::path& path, const std::vector<DialoguePair>& pairs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CorpusError("cannot write " + path.string());
  write_jsonl(out, pairs);
}

std::vector<DialoguePair> read_jsonl(std::istream& in) {
  std::vector<DialoguePair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      pairs.push_back({j.at("q").get<std::string>(), j.at("a").get<std::string>()});
    } catch (const json::exception& e) {
      throw CorpusError("pairs line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return pairs;
}

std::vector<DialoguePair> read_jsonl(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_jsonl(in);
}

}  // namespace cwgan::text
