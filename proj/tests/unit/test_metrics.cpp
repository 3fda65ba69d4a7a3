#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

#include "cwgan/metrics/metrics.hpp"
#include "cwgan/text/tokenizer.hpp"
#include "support/metric_oracles.hpp"

using namespace cwgan;
using namespace cwgan::metrics;
using text::tokenize;

TEST_CASE("hand-worked fixtures") {
  for (const auto& f : testing::metric_fixtures()) {
    CAPTURE(f.candidate);
    const auto c = tokenize(f.candidate), r = tokenize(f.reference);
    CHECK(bleu4(c, r) == doctest::Approx(f.bleu4).epsilon(1e-12));
    CHECK(rouge_l(c, r) == doctest::Approx(f.rouge_l).epsilon(1e-12));
    CHECK(f_measure(c, r) == doctest::Approx(f.f_measure).epsilon(1e-12));
    CHECK(meteor_lite(c, r) == doctest::Approx(f.meteor).epsilon(1e-12));
  }
}

TEST_CASE("identical sentences score one") {
  const auto s = tokenize("i would like a cup of tea please");
  CHECK(bleu4(s, s) == doctest::Approx(1));
  CHECK(rouge_l(s, s) == 1);
  CHECK(f_measure(s, s) == 1);
  CHECK(meteor_lite(s, s) >= 0.99);
}

TEST_CASE("empty inputs score zero") {
  const Tokens none, some = {"a"};
  CHECK(bleu4(none, some) == 0);
  CHECK(rouge_l(some, none) == 0);
  CHECK(f_measure(none, none) == 0);
  CHECK(meteor_lite(none, some) == 0);
}

TEST_CASE("random pairs agree with the oracles and stay in range") {
  std::mt19937_64 rng(17);
  const Tokens words = {"a", "b", "c", "d", "e", "walk", "walks", "walked"};
  auto sentence = [&] {
    Tokens s(1 + rng() % 10);
    for (auto& w : s) w = words[rng() % words.size()];
    return s;
  };
  for (int i = 0; i < 500; ++i) {
    const Tokens c = sentence(), r = sentence();
    CHECK(bleu4(c, r) == doctest::Approx(testing::naive_bleu4(c, r)).epsilon(1e-12));
    CHECK(lcs_length(c, r) == testing::brute_lcs(c, r));
    for (double v : {bleu4(c, r), rouge_l(c, r), f_measure(c, r), meteor_lite(c, r)}) {
      CHECK(v >= 0);
      CHECK(v <= 1);
    }
  }
}

TEST_CASE("suffix stripping keeps a three-letter stem") {
  CHECK(strip_suffix("walking") == "walk");
  CHECK(strip_suffix("played") == "play");
  CHECK(strip_suffix("boxes") == "box");
  CHECK(strip_suffix("cats") == "cat");
  CHECK(strip_suffix("is") == "is");
  CHECK(strip_suffix("sing") == "sing");
}

TEST_CASE("chunk counting") {
  CHECK(count_chunks({}) == 0);
  CHECK(count_chunks({{0, 0}, {1, 1}, {2, 2}}) == 1);
  CHECK(count_chunks({{2, 0}, {0, 1}, {1, 2}}) == 2);
}

TEST_CASE("alignment prefers continuing the previous slot") {
  const auto a = meteor_align({"the", "x", "the", "cat"}, {"the", "cat", "the", "cat"});
  REQUIRE(a.size() == 3);
  CHECK(a[0].reference == 0);
  CHECK(a[1].reference == 2);
  CHECK(a[2].reference == 3);
}

TEST_CASE("corpus evaluation averages sentences and reports") {
  const std::vector<QuestionAnswer> test = {{"q1", "hello there"}, {"q2", "no idea"}};
  const auto report = evaluate_corpus([](const std::string&) { return std::string("hello there"); }, test, "toy");
  CHECK(report.n == 2);
  CHECK(report.rouge_l == doctest::Approx(0.5));
  CHECK(report.sentences[0].candidate == "hello there");
  CHECK_THROWS(evaluate_corpus([](const std::string&) { return std::string(); }, {}));

  const auto j = nlohmann::json::parse(report_json(report));
  CHECK(j["corpus"] == "toy");
  CHECK(j["n"] == 2);
  CHECK(j["rouge_l"].get<double>() == doctest::Approx(0.5));

  const auto dir = std::filesystem::temp_directory_path() / "cwgan_metric_test";
  std::filesystem::create_directories(dir);
  write_report(report, dir / "r.json");
  write_sentence_csv(report, dir / "r.csv");
  std::ifstream csv(dir / "r.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header.find("bleu4") != std::string::npos);
  std::size_t rows = 0;
  for (std::string line; std::getline(csv, line);) rows += !line.empty();
  CHECK(rows == 2);
  std::filesystem::remove_all(dir);
}
