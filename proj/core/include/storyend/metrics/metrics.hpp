#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "storyend/embeddings/embeddings.hpp"
#include "storyend/metrics/tokenizer.hpp"
#include "storyend/ngram/word_lm.hpp"

namespace storyend::metrics {

/// Degenerate-input markers. A flagged metric still returns a value (0 for
/// the overlap metrics) instead of failing.
enum ScoreFlag : std::uint32_t {
  kNoFlags = 0,
  kEmptyCandidate = 1u << 0,
  kEmptyReference = 1u << 1,
  kCandidateShorterThanN = 1u << 2,
  kReferenceShorterThanN = 1u << 3,
};

std::vector<std::string> flag_names(std::uint32_t flags);

struct MetricConfig {
  TokenizerConfig tokenizer;
  int bleu_max_n = 4;
  std::vector<int> rouge_n_orders{1, 2};
  double meteor_alpha = 0.9;
  double meteor_beta = 3.0;
  double meteor_gamma = 0.5;

  /// Throws ConfigError when a parameter is out of range.
  void validate() const;
};

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint32_t flags = kNoFlags;
};

/// Harmonic mean, 0 when p + r == 0.
double harmonic_mean(double p, double r) noexcept;

struct BleuResult {
  double score = 0.0;
  double brevity_penalty = 1.0;
  int effective_order = 0;          // min(max_n, |candidate|)
  std::vector<double> precisions;   // clipped precision per order 1..effective_order
  std::uint32_t flags = kNoFlags;
};

/// Single-reference sentence BLEU without smoothing.
BleuResult bleu(std::span<const std::string> candidate, std::span<const std::string> reference, int max_n = 4);

/// Corpus-level BLEU: clipped counts and lengths are summed over all pairs
/// before the geometric mean and brevity penalty are taken.
class CorpusBleu {
 public:
  explicit CorpusBleu(int max_n = 4);
  void add(std::span<const std::string> candidate, std::span<const std::string> reference);
  double score() const;
  std::size_t pairs() const noexcept { return pairs_; }

 private:
  int max_n_;
  std::vector<std::uint64_t> matched_;
  std::vector<std::uint64_t> totals_;
  std::uint64_t candidate_length_ = 0;
  std::uint64_t reference_length_ = 0;
  std::size_t pairs_ = 0;
};

/// ROUGE-N with multiset clipping.
Prf rouge_n(std::span<const std::string> candidate, std::span<const std::string> reference, int n);

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);
Prf rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference);

struct MeteorResult {
  double score = 0.0;
  std::size_t matches = 0;
  std::size_t exact_matches = 0;
  std::size_t chunks = 0;
  double precision = 0.0;
  double recall = 0.0;
  double fmean = 0.0;
  double penalty = 0.0;
  std::uint32_t flags = kNoFlags;
};

/// METEOR with exact then Porter-stem unigram matching (no synonym stage).
/// Each stage keeps the maximum number of matches and, among those, the
/// alignment with the fewest chunks.
MeteorResult meteor(std::span<const std::string> candidate, std::span<const std::string> reference,
                    const MetricConfig& config = {});

/// Greedy-matching BERTScore without idf weighting or baseline rescaling.
/// Candidate and reference are embedded in a single provider batch.
Prf bert_score(std::span<const std::string> candidate, std::span<const std::string> reference,
               embeddings::EmbeddingProvider& provider);

/// exp(-log_prob / token_count); token_count includes the end token.
double perplexity(std::string_view text, const ngram::SequenceScorer& scorer);

struct ScoreSet {
  double bleu = 0.0;
  double rouge1_f = 0.0;
  double rouge2_f = 0.0;
  double rougeL_f = 0.0;
  std::map<int, double> rouge_n_f;  // every configured order
  double meteor = 0.0;
  double bert_p = 0.0;
  double bert_r = 0.0;
  double bert_f1 = 0.0;
  double perplexity = 1.0;
  std::uint32_t flags = kNoFlags;

  bool operator==(const ScoreSet&) const = default;
};

/// Tokenizes both sides once and computes every metric; perplexity is
/// computed on the candidate only.
ScoreSet score_pair(std::string_view candidate, std::string_view reference, const MetricConfig& config,
                    embeddings::EmbeddingProvider& provider, const ngram::SequenceScorer& scorer);

}  // namespace storyend::metrics
