#include "storyend/ngram/word_lm.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "storyend/common/error.hpp"

namespace storyend::ngram {

namespace {

constexpr std::uint32_t kUnknownId = 0;
constexpr std::uint32_t kStartId = 1;
constexpr std::uint32_t kEndId = 2;

}  // namespace

WordNgramLm WordNgramLm::fit(std::span<const std::string> texts, int order, double alpha,
                             const metrics::TokenizerConfig& tokenizer) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw ConfigError(fmt::format("smoothing alpha must be positive and finite, got {}", alpha));
  }
  return build(texts, order, alpha, Smoothing::kAdditive, tokenizer);
}

WordNgramLm WordNgramLm::fit_unsmoothed(std::span<const std::string> texts, int order,
                                        const metrics::TokenizerConfig& tokenizer) {
  return build(texts, order, 0.0, Smoothing::kNone, tokenizer);
}

WordNgramLm WordNgramLm::build(std::span<const std::string> texts, int order, double alpha, Smoothing smoothing,
                               const metrics::TokenizerConfig& tokenizer) {
  if (order < 1) throw ConfigError(fmt::format("word LM order must be >= 1, got {}", order));
  if (texts.empty()) throw ConfigError("word LM needs a non-empty training set");

  WordNgramLm lm;
  lm.order_ = order;
  lm.alpha_ = alpha;
  lm.smoothing_ = smoothing;
  lm.tokenizer_ = tokenizer;
  for (auto reserved : {kUnknown, kStart, kEnd}) {
    lm.ids_.emplace(std::string(reserved), static_cast<TokenId>(lm.tokens_.size()));
    lm.tokens_.emplace_back(reserved);
  }

  const auto history = static_cast<std::size_t>(order - 1);
  std::vector<TokenId> ids;
  for (const auto& text : texts) {
    ids.assign(history, kStartId);
    for (auto& token : metrics::tokenize(text, tokenizer)) {
      auto [it, inserted] = lm.ids_.try_emplace(token, static_cast<TokenId>(lm.tokens_.size()));
      if (inserted) lm.tokens_.push_back(std::move(token));
      ids.push_back(it->second);
    }
    ids.push_back(kEndId);
    for (std::size_t i = history; i < ids.size(); ++i) {
      auto& counts = lm.counts_[key_of(std::span(ids).subspan(i - history, history))];
      ++counts.total;
      ++counts.next[ids[i]];
    }
  }
  lm.predictive_size_ = lm.tokens_.size() - 1;
  return lm;
}

std::string WordNgramLm::key_of(std::span<const TokenId> context) {
  std::string key(context.size() * sizeof(TokenId), '\0');
  for (std::size_t i = 0; i < context.size(); ++i) {
    for (std::size_t b = 0; b < sizeof(TokenId); ++b) {
      key[i * sizeof(TokenId) + b] = static_cast<char>((context[i] >> (8 * b)) & 0xFF);
    }
  }
  return key;
}

WordNgramLm::TokenId WordNgramLm::id_of(std::string_view token) const {
  const auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnknownId : it->second;
}

double WordNgramLm::conditional(std::span<const TokenId> context, TokenId token) const {
  std::uint64_t context_total = 0;
  std::uint64_t joint = 0;
  if (const auto it = counts_.find(key_of(context)); it != counts_.end()) {
    context_total = it->second.total;
    if (const auto nt = it->second.next.find(token); nt != it->second.next.end()) joint = nt->second;
  }
  const auto v = static_cast<double>(predictive_size_);
  if (smoothing_ == Smoothing::kAdditive) {
    return (static_cast<double>(joint) + alpha_) / (static_cast<double>(context_total) + alpha_ * v);
  }
  if (context_total == 0) return 1.0 / v;
  return static_cast<double>(joint) / static_cast<double>(context_total);
}

double WordNgramLm::probability(std::span<const std::string> context, std::string_view token) const {
  const TokenId target = id_of(token);
  if (target == kStartId) return 0.0;
  const auto history = static_cast<std::size_t>(order_ - 1);
  std::vector<TokenId> ctx(history, kStartId);
  const std::size_t take = std::min(history, context.size());
  for (std::size_t i = 0; i < take; ++i) {
    ctx[history - take + i] = id_of(context[context.size() - take + i]);
  }
  return conditional(ctx, target);
}

std::vector<WordNgramLm::TokenId> WordNgramLm::wrapped_ids(std::string_view text) const {
  std::vector<TokenId> ids(static_cast<std::size_t>(order_ - 1), kStartId);
  for (const auto& token : metrics::tokenize(text, tokenizer_)) ids.push_back(id_of(token));
  ids.push_back(kEndId);
  return ids;
}

std::vector<std::string> WordNgramLm::wrap(std::string_view text) const {
  std::vector<std::string> out;
  for (TokenId id : wrapped_ids(text)) out.push_back(tokens_[id]);
  return out;
}

LogProb WordNgramLm::score(std::string_view text) const {
  const auto ids = wrapped_ids(text);
  const auto history = static_cast<std::size_t>(order_ - 1);
  LogProb result;
  for (std::size_t i = history; i < ids.size(); ++i) {
    result.log_prob += std::log(conditional(std::span(ids).subspan(i - history, history), ids[i]));
    ++result.token_count;
  }
  return result;
}

std::vector<std::string> WordNgramLm::vocabulary() const {
  std::vector<std::string> out;
  out.reserve(predictive_size_);
  for (std::size_t id = 0; id < tokens_.size(); ++id) {
    if (id != kStartId) out.push_back(tokens_[id]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

UniformScorer::UniformScorer(std::size_t vocabulary_size, metrics::TokenizerConfig tokenizer)
    : vocabulary_size_(vocabulary_size), tokenizer_(tokenizer) {
  if (vocabulary_size_ == 0) throw ConfigError("uniform scorer needs a non-empty vocabulary");
}

LogProb UniformScorer::score(std::string_view text) const {
  LogProb result;
  result.token_count = metrics::tokenize(text, tokenizer_).size() + 1;
  result.log_prob = -static_cast<double>(result.token_count) * std::log(static_cast<double>(vocabulary_size_));
  return result;
}

}  // namespace storyend::ngram
