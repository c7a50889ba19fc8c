#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "storyend/metrics/tokenizer.hpp"

namespace storyend::ngram {

/// Natural-log probability of a token sequence and the number of predicted
/// tokens (words plus the end token).
struct LogProb {
  double log_prob = 0.0;
  std::size_t token_count = 0;
};

/// Anything that can assign a log probability to a text. Perplexity is
/// computed against this interface so the scorer stays pluggable.
class SequenceScorer {
 public:
  virtual ~SequenceScorer() = default;
  virtual LogProb score(std::string_view text) const = 0;
};

inline double sequence_log_prob(const SequenceScorer& scorer, std::string_view text) {
  return scorer.score(text).log_prob;
}

enum class Smoothing { kAdditive, kNone };

/// Word n-gram language model with additive (Lidstone) smoothing. The
/// predictive vocabulary is the observed words plus <unk> and </s>; <s> only
/// ever appears as context.
class WordNgramLm final : public SequenceScorer {
 public:
  static constexpr std::string_view kUnknown = "<unk>";
  static constexpr std::string_view kStart = "<s>";
  static constexpr std::string_view kEnd = "</s>";

  /// Throws ConfigError on order < 1, alpha <= 0 or an empty training set.
  static WordNgramLm fit(std::span<const std::string> texts, int order, double alpha,
                         const metrics::TokenizerConfig& tokenizer = {});
  /// Maximum-likelihood estimates; unseen contexts are uniform, unseen
  /// continuations of seen contexts have probability 0.
  static WordNgramLm fit_unsmoothed(std::span<const std::string> texts, int order,
                                    const metrics::TokenizerConfig& tokenizer = {});

  int order() const noexcept { return order_; }
  double alpha() const noexcept { return alpha_; }
  Smoothing smoothing() const noexcept { return smoothing_; }
  std::size_t vocabulary_size() const noexcept { return predictive_size_; }
  /// Predictive vocabulary, sorted.
  std::vector<std::string> vocabulary() const;

  /// P(token | context); context may hold <s> and is truncated to the last
  /// order-1 tokens. Unknown words map to <unk>.
  double probability(std::span<const std::string> context, std::string_view token) const;

  /// Tokenized text wrapped with order-1 <s> tokens and one </s>, OOV -> <unk>.
  std::vector<std::string> wrap(std::string_view text) const;

  LogProb score(std::string_view text) const override;

 private:
  using TokenId = std::uint32_t;
  struct ContextCounts {
    std::uint64_t total = 0;
    std::unordered_map<TokenId, std::uint64_t> next;
  };

  static WordNgramLm build(std::span<const std::string> texts, int order, double alpha, Smoothing smoothing,
                           const metrics::TokenizerConfig& tokenizer);
  TokenId id_of(std::string_view token) const;
  std::vector<TokenId> wrapped_ids(std::string_view text) const;
  double conditional(std::span<const TokenId> context, TokenId token) const;
  static std::string key_of(std::span<const TokenId> context);

  int order_ = 1;
  double alpha_ = 0.0;
  Smoothing smoothing_ = Smoothing::kAdditive;
  metrics::TokenizerConfig tokenizer_;
  std::vector<std::string> tokens_;  // id -> token; ids 0,1,2 = <unk>, <s>, </s>
  std::unordered_map<std::string, TokenId> ids_;
  std::size_t predictive_size_ = 0;
  std::unordered_map<std::string, ContextCounts> counts_;
};

/// Every token equally likely among `vocabulary_size`: perplexity is exactly
/// vocabulary_size for any text.
class UniformScorer final : public SequenceScorer {
 public:
  explicit UniformScorer(std::size_t vocabulary_size, metrics::TokenizerConfig tokenizer = {});
  LogProb score(std::string_view text) const override;

 private:
  std::size_t vocabulary_size_;
  metrics::TokenizerConfig tokenizer_;
};

}  // namespace storyend::ngram
