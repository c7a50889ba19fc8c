#include <algorithm>
#include <cmath>

#include "storyend/metrics/metrics.hpp"

namespace storyend::metrics {

Prf bert_score(std::span<const std::string> candidate, std::span<const std::string> reference,
               embeddings::EmbeddingProvider& provider) {
  Prf result;
  if (candidate.empty()) result.flags |= kEmptyCandidate;
  if (reference.empty()) result.flags |= kEmptyReference;
  if (result.flags != kNoFlags) return result;

  std::vector<std::string> batch(candidate.begin(), candidate.end());
  batch.insert(batch.end(), reference.begin(), reference.end());
  const auto matrix = embeddings::embed_tokens(provider, batch);
  const std::size_t nc = candidate.size();
  const std::size_t nr = reference.size();

  std::vector<double> best_for_cand(nc, -1.0);
  std::vector<double> best_for_ref(nr, -1.0);
  for (std::size_t i = 0; i < nc; ++i) {
    for (std::size_t j = 0; j < nr; ++j) {
      const double sim = embeddings::cosine(matrix.vectors[i], matrix.vectors[nc + j]);
      best_for_cand[i] = std::max(best_for_cand[i], sim);
      best_for_ref[j] = std::max(best_for_ref[j], sim);
    }
  }
  double p = 0.0;
  for (double s : best_for_cand) p += s;
  double r = 0.0;
  for (double s : best_for_ref) r += s;
  result.precision = p / static_cast<double>(nc);
  result.recall = r / static_cast<double>(nr);
  result.f1 = harmonic_mean(result.precision, result.recall);
  return result;
}

double perplexity(std::string_view text, const ngram::SequenceScorer& scorer) {
  const auto lp = scorer.score(text);
  if (lp.token_count == 0) return 1.0;
  return std::exp(-lp.log_prob / static_cast<double>(lp.token_count));
}

ScoreSet score_pair(std::string_view candidate, std::string_view reference, const MetricConfig& config,
                    embeddings::EmbeddingProvider& provider, const ngram::SequenceScorer& scorer) {
  const Tokens cand = tokenize(candidate, config.tokenizer);
  const Tokens ref = tokenize(reference, config.tokenizer);

  ScoreSet s;
  const auto b = bleu(cand, ref, config.bleu_max_n);
  s.bleu = b.score;
  s.flags |= b.flags;

  const auto r1 = rouge_n(cand, ref, 1);
  const auto r2 = rouge_n(cand, ref, 2);
  s.rouge1_f = r1.f1;
  s.rouge2_f = r2.f1;
  for (int n : config.rouge_n_orders) s.rouge_n_f[n] = n == 1 ? r1.f1 : n == 2 ? r2.f1 : rouge_n(cand, ref, n).f1;
  s.flags |= r1.flags | r2.flags;
  const auto rl = rouge_l(cand, ref);
  s.rougeL_f = rl.f1;
  const auto met = meteor(cand, ref, config);
  s.meteor = met.score;
  s.flags |= rl.flags | met.flags;

  const auto bert = bert_score(cand, ref, provider);
  s.bert_p = bert.precision;
  s.bert_r = bert.recall;
  s.bert_f1 = bert.f1;
  s.flags |= bert.flags;

  s.perplexity = perplexity(candidate, scorer);
  return s;
}

}  // namespace storyend::metrics
