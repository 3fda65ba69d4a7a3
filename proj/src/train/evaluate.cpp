#include "cwgan/train/evaluate.hpp"

#include "cwgan/text/batching.hpp"

namespace cwgan::inline CWGAN_PRECISION_NS::train {

Answer answer_question(const model::GeneratorModel& generator, const text::Vocab& vocab,
                       const std::string& question, std::size_t max_steps) {
  const std::size_t max_len = generator.config().max_len;
  const text::TokenSequence wrapped = text::wrap_sequence(vocab.encode(text::tokenize(question)), max_len);
  Answer out;
  out.ids = model::infer(generator, std::span<const text::TokenId>(wrapped.ids), max_steps);
  out.text = vocab.decode_text(out.ids);
  return out;
}

metrics::MetricReport evaluate_generator(const model::GeneratorModel& generator, const text::Vocab& vocab,
                                         const std::vector<text::DialoguePair>& test, std::string corpus) {
  std::vector<metrics::QuestionAnswer> qa;
  qa.reserve(test.size());
  for (const auto& p : test) qa.push_back({p.question, p.answer});
  const std::size_t steps = generator.config().max_len;
  return metrics::evaluate_corpus(
      [&](const std::string& q) { return answer_question(generator, vocab, q, steps).text; }, qa, std::move(corpus));
}

}  // namespace cwgan::inline CWGAN_PRECISION_NS::train
