#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "cwgan/metrics/metrics.hpp"

namespace cwgan::metrics {

std::string report_json(const MetricReport& report) {
  nlohmann::ordered_json j;
  j["corpus"] = report.corpus;
  j["n"] = report.n;
  j["bleu4"] = report.bleu4;
  j["rouge_l"] = report.rouge_l;
  j["f_measure"] = report.f_measure;
  j["meteor"] = report.meteor;
  j["aggregation"] = "mean of sentence scores";
  j["bleu_smoothing"] = "add-one on zero-match orders 2-4";
  j["rouge_beta"] = 1;
  return j.dump(2);
}

void write_report(const MetricReport& report, const std::filesystem::path& json_path) {
  std::ofstream out(json_path);
  if (!out) throw std::runtime_error("cannot write " + json_path.string());
  out << report_json(report) << '\n';
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

void write_sentence_csv(const MetricReport& report, const std::filesystem::path& csv_path) {
  std::ofstream out(csv_path);
  if (!out) throw std::runtime_error("cannot write " + csv_path.string());
  out << "index,question,reference,candidate,bleu4,rouge_l,f_measure,meteor\n";
  out.precision(17);
  for (std::size_t i = 0; i < report.sentences.size(); ++i) {
    const auto& s = report.sentences[i];
    out << i << ',' << csv_field(s.question) << ',' << csv_field(s.reference) << ','
        << csv_field(s.candidate) << ',' << s.scores.bleu4 << ',' << s.scores.rouge_l << ','
        << s.scores.f_measure << ',' << s.scores.meteor << '\n';
  }
}

}  // namespace cwgan::metrics
