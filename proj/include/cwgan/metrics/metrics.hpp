#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace cwgan::metrics {

using Tokens = std::vector<std::string>;

/// Geometric mean of clipped n-gram precisions (n = 1..4) times the brevity
/// penalty exp(min(0, 1 - |ref| / |cand|)).
/// A zero match count at n >= 2 is smoothed to 1 / (candidate n-grams + 1);
/// unigram precision is never smoothed, so disjoint sentences score 0.
/// Orders longer than the candidate are left out of the mean.
double bleu4(const Tokens& candidate, const Tokens& reference);

/// F1 of LCS precision and recall.
double rouge_l(const Tokens& candidate, const Tokens& reference);
std::size_t lcs_length(const Tokens& a, const Tokens& b);

/// F1 of unigram multiset overlap.
double f_measure(const Tokens& candidate, const Tokens& reference);

/// Strips one of ing/ed/es/s when at least three characters remain.
std::string strip_suffix(const std::string& word);

struct Alignment {
  std::size_t candidate = 0;
  std::size_t reference = 0;
};

/// Exact matches first, then suffix-stripped matches. Each candidate token,
/// left to right, takes the reference slot right after its left neighbour's
/// slot when that one matches, otherwise the first free matching slot.
std::vector<Alignment> meteor_align(const Tokens& candidate, const Tokens& reference);
std::size_t count_chunks(std::vector<Alignment> alignment);

/// Fmean = 10PR / (R + 9P), penalty = 0.5 (chunks / matches)^3.
double meteor_lite(const Tokens& candidate, const Tokens& reference);

struct SentenceScores {
  double bleu4 = 0;
  double rouge_l = 0;
  double f_measure = 0;
  double meteor = 0;
};

SentenceScores score_sentence(const Tokens& candidate, const Tokens& reference);

struct SentenceRecord {
  std::string question;
  std::string reference;
  std::string candidate;
  SentenceScores scores;
};

struct MetricReport {
  std::string corpus;
  std::size_t n = 0;
  double bleu4 = 0;
  double rouge_l = 0;
  double f_measure = 0;
  double meteor = 0;
  std::vector<SentenceRecord> sentences;
};

/// Corpus score of each metric is the mean of the sentence scores.
MetricReport aggregate(std::string corpus, std::vector<SentenceRecord> sentences);

using Responder = std::function<std::string(const std::string& question)>;

struct QuestionAnswer {
  std::string question;
  std::string answer;
};

/// Asks `respond` every question and scores the reply against the answer.
MetricReport evaluate_corpus(const Responder& respond, const std::vector<QuestionAnswer>& test,
                             std::string corpus = "test");

std::string report_json(const MetricReport& report);
void write_report(const MetricReport& report, const std::filesystem::path& json_path);
void write_sentence_csv(const MetricReport& report, const std::filesystem::path& csv_path);

}  // namespace cwgan::metrics
