#pragma once

#include <filesystem>
#include <functional>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cwgan::text {

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DialoguePair {
  std::string question;
  std::string answer;

  friend bool operator==(const DialoguePair&, const DialoguePair&) = default;
};

using PairSink = std::function<void(DialoguePair)>;

struct CornellStats {
  std::size_t lines_parsed = 0;
  std::size_t conversations = 0;
  std::size_t pairs = 0;
  std::size_t empty_pairs = 0;
  std::size_t malformed_rows = 0;
  std::size_t missing_references = 0;
};

/// Field separator of both Cornell files.
inline constexpr std::string_view kCornellDelimiter = " +++$+++ ";

/// Reads the movie-lines and conversations files. Consecutive utterances in a
/// conversation become pairs; rows that cannot be parsed and line ids that
/// do not resolve are counted and skipped.
CornellStats parse_cornell(std::istream& lines, std::istream& conversations, const PairSink& sink);
CornellStats parse_cornell(const std::filesystem::path& lines_path,
                           const std::filesystem::path& conversations_path, const PairSink& sink);

struct ChitChatStats {
  std::size_t conversations = 0;
  std::size_t empty_conversations = 0;
  std::size_t messages = 0;
  std::size_t turns = 0;  // after merging same-sender runs
  std::size_t pairs = 0;
};

/// Reads a JSON object of conversations. Each conversation carries a
/// "messages" array, either flat or grouped into lists, of objects with
/// "text" and "sender". Same-sender runs merge into one turn.
ChitChatStats parse_chitchat(std::istream& in, const PairSink& sink);
ChitChatStats parse_chitchat(const std::filesystem::path& path, const PairSink& sink);

/// One {"q": ..., "a": ...} object per line.
void write_jsonl(std::ostream& out, const std::vector<DialoguePair>& pairs);
void write_jsonl(const std::filesystem::path& path, const std::vector<DialoguePair>& pairs);
std::vector<DialoguePair> read_jsonl(std::istream& in);
std::vector<DialoguePair> read_jsonl(const std::filesystem::path& path);

}  // namespace cwgan::text
