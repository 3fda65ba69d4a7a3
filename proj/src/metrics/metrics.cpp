#include "cwgan/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "cwgan/text/tokenizer.hpp"

namespace cwgan::metrics {

namespace {

std::map<Tokens, std::size_t> ngram_counts(const Tokens& tokens, std::size_t n) {
  std::map<Tokens, std::size_t> counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[Tokens(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                    tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

double f1(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

}  // namespace

double bleu4(const Tokens& candidate, const Tokens& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const std::size_t max_order = std::min<std::size_t>(4, candidate.size());
  double log_sum = 0;
  for (std::size_t n = 1; n <= max_order; ++n) {
    const auto cand = ngram_counts(candidate, n);
    const auto ref = ngram_counts(reference, n);
    std::size_t matched = 0;
    for (const auto& [gram, c] : cand) {
      auto it = ref.find(gram);
      if (it != ref.end()) matched += std::min(c, it->second);
    }
    const std::size_t total = candidate.size() - n + 1;
    if (matched == 0) {
      if (n == 1) return 0.0;
      log_sum += -std::log(static_cast<double>(total + 1));
    } else {
      log_sum += std::log(static_cast<double>(matched) / static_cast<double>(total));
    }
  }
  const double ratio = static_cast<double>(reference.size()) / static_cast<double>(candidate.size());
  const double brevity = std::exp(std::min(0.0, 1.0 - ratio));
  return brevity * std::exp(log_sum / static_cast<double>(max_order));
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const Tokens& candidate, const Tokens& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const double lcs = static_cast<double>(lcs_length(candidate, reference));
  return f1(lcs / static_cast<double>(candidate.size()), lcs / static_cast<double>(reference.size()));
}

double f_measure(const Tokens& candidate, const Tokens& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  std::map<std::string, std::size_t> ref;
  for (const auto& t : reference) ++ref[t];
  std::size_t overlap = 0;
  for (const auto& t : candidate) {
    auto it = ref.find(t);
    if (it != ref.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  const double o = static_cast<double>(overlap);
  return f1(o / static_cast<double>(candidate.size()), o / static_cast<double>(reference.size()));
}

std::string strip_suffix(const std::string& word) {
  for (const std::string suffix : {"ing", "ed", "es", "s"}) {
    if (word.size() >= suffix.size() + 3 && word.compare(word.size() - suffix.size(), suffix.size(), suffix) == 0) {
      return word.substr(0, word.size() - suffix.size());
    }
  }
  return word;
}

std::vector<Alignment> meteor_align(const Tokens& candidate, const Tokens& reference) {
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> slot(candidate.size(), kNone);
  std::vector<bool> taken(reference.size(), false);

  auto stage = [&](auto&& same) {
    for (std::size_t i = 0; i < candidate.size(); ++i) {
      if (slot[i] != kNone) continue;
      std::size_t chosen = kNone;
      if (i > 0 && slot[i - 1] != kNone) {
        const std::size_t next = slot[i - 1] + 1;
        if (next < reference.size() && !taken[next] && same(candidate[i], reference[next])) chosen = next;
      }
      for (std::size_t j = 0; chosen == kNone && j < reference.size(); ++j) {
        if (!taken[j] && same(candidate[i], reference[j])) chosen = j;
      }
      if (chosen != kNone) {
        slot[i] = chosen;
        taken[chosen] = true;
      }
    }
  };
  stage([](const std::string& a, const std::string& b) { return a == b; });
  stage([](const std::string& a, const std::string& b) { return strip_suffix(a) == strip_suffix(b); });

  std::vector<Alignment> out;
  for (std::size_t i = 0; i < candidate.size(); ++i)
    if (slot[i] != kNone) out.push_back({i, slot[i]});
  return out;
}

std::size_t count_chunks(std::vector<Alignment> alignment) {
  if (alignment.empty()) return 0;
  std::sort(alignment.begin(), alignment.end(),
            [](const Alignment& a, const Alignment& b) { return a.candidate < b.candidate; });
  std::size_t chunks = 1;
  for (std::size_t i = 1; i < alignment.size(); ++i) {
    const bool adjacent = alignment[i].candidate == alignment[i - 1].candidate + 1 &&
                          alignment[i].reference == alignment[i - 1].reference + 1;
    if (!adjacent) ++chunks;
  }
  return chunks;
}

double meteor_lite(const Tokens& candidate, const Tokens& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const auto alignment = meteor_align(candidate, reference);
  if (alignment.empty()) return 0.0;
  const double m = static_cast<double>(alignment.size());
  const double p = m / static_cast<double>(candidate.size());
  const double r = m / static_cast<double>(reference.size());
  const double fmean = 10 * p * r / (r + 9 * p);
  const double frag = static_cast<double>(count_chunks(alignment)) / m;
  return fmean * (1.0 - 0.5 * frag * frag * frag);
}

SentenceScores score_sentence(const Tokens& candidate, const Tokens& reference) {
  return {bleu4(candidate, reference), rouge_l(candidate, reference), f_measure(candidate, reference),
          meteor_lite(candidate, reference)};
}

MetricReport aggregate(std::string corpus, std::vector<SentenceRecord> sentences) {
  MetricReport report;
  report.corpus = std::move(corpus);
  report.n = sentences.size();
  for (const auto& s : sentences) {
    report.bleu4 += s.scores.bleu4;
    report.rouge_l += s.scores.rouge_l;
    report.f_measure += s.scores.f_measure;
    report.meteor += s.scores.meteor;
  }
  if (report.n > 0) {
    const double n = static_cast<double>(report.n);
    report.bleu4 /= n;
    report.rouge_l /= n;
    report.f_measure /= n;
    report.meteor /= n;
  }
  report.sentences = std::move(sentences);
  return report;
}

MetricReport evaluate_corpus(const Responder& respond, const std::vector<QuestionAnswer>& test,
                             std::string corpus) {
  if (test.empty()) throw std::invalid_argument("evaluate_corpus: empty test set");
  std::vector<SentenceRecord> records;
  records.reserve(test.size());
  for (const auto& qa : test) {
    SentenceRecord rec;
    rec.question = qa.question;
    rec.reference = qa.answer;
    rec.candidate = respond(qa.question);
    rec.scores = score_sentence(text::tokenize(rec.candidate), text::tokenize(rec.reference));
    records.push_back(std::move(rec));
  }
  return aggregate(std::move(corpus), std::move(records));
}

}  // namespace cwgan::metrics
