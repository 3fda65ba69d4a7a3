#pragma once

#include <string>
#include <vector>

#include "cwgan/metrics/metrics.hpp"
#include "cwgan/model/generator.hpp"
#include "cwgan/text/corpus.hpp"
#include "cwgan/text/vocab.hpp"

namespace cwgan::inline CWGAN_PRECISION_NS::train {

struct Answer {
  std::string text;
  std::vector<text::TokenId> ids;
};

/// Tokenizes, wraps to max_len and greedy-decodes at most `max_steps` tokens.
Answer answer_question(const model::GeneratorModel& generator, const text::Vocab& vocab,
                       const std::string& question, std::size_t max_steps);

/// Greedy answers for every test question scored against the references.
metrics::MetricReport evaluate_generator(const model::GeneratorModel& generator, const text::Vocab& vocab,
                                         const std::vector<text::DialoguePair>& test, std::string corpus = "test");

}  // namespace cwgan::inline CWGAN_PRECISION_NS::train
