#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <fmt/format.h>

#include "storyend/common/error.hpp"
#include "storyend/metrics/metrics.hpp"

namespace storyend::metrics {

namespace {

using NgramCounts = std::unordered_map<std::string, std::uint64_t>;

NgramCounts count_ngrams(std::span<const std::string> tokens, int n) {
  NgramCounts counts;
  const auto len = static_cast<std::size_t>(n);
  if (tokens.size() < len) return counts;
  for (std::size_t i = 0; i + len <= tokens.size(); ++i) {
    std::string key;
    for (std::size_t k = 0; k < len; ++k) {
      if (k != 0) key.push_back('\x1f');
      key += tokens[i + k];
    }
    ++counts[key];
  }
  return counts;
}

std::uint64_t clipped_overlap(const NgramCounts& candidate, const NgramCounts& reference) {
  std::uint64_t overlap = 0;
  for (const auto& [gram, count] : candidate) {
    if (const auto it = reference.find(gram); it != reference.end()) overlap += std::min(count, it->second);
  }
  return overlap;
}

}  // namespace

std::vector<std::string> flag_names(std::uint32_t flags) {
  std::vector<std::string> names;
  if (flags & kEmptyCandidate) names.emplace_back("empty_candidate");
  if (flags & kEmptyReference) names.emplace_back("empty_reference");
  if (flags & kCandidateShorterThanN) names.emplace_back("candidate_shorter_than_n");
  if (flags & kReferenceShorterThanN) names.emplace_back("reference_shorter_than_n");
  return names;
}

void MetricConfig::validate() const {
  if (bleu_max_n < 1) throw ConfigError(fmt::format("bleu_max_n must be >= 1, got {}", bleu_max_n));
  for (int n : rouge_n_orders) {
    if (n < 1) throw ConfigError(fmt::format("ROUGE-N order must be >= 1, got {}", n));
  }
  if (!(meteor_alpha > 0.0 && meteor_alpha <= 1.0)) throw ConfigError("meteor_alpha must lie in (0, 1]");
  if (!(meteor_beta >= 1.0)) throw ConfigError("meteor_beta must be >= 1");
  if (!(meteor_gamma > 0.0 && meteor_gamma <= 1.0)) throw ConfigError("meteor_gamma must lie in (0, 1]");
}

double harmonic_mean(double p, double r) noexcept { return (p + r) == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

BleuResult bleu(std::span<const std::string> candidate, std::span<const std::string> reference, int max_n) {
  if (max_n < 1) throw ConfigError(fmt::format("BLEU max_n must be >= 1, got {}", max_n));
  BleuResult result;
  if (candidate.empty()) result.flags |= kEmptyCandidate;
  if (reference.empty()) result.flags |= kEmptyReference;
  if (result.flags != kNoFlags) return result;

  result.effective_order = std::min(max_n, static_cast<int>(candidate.size()));
  if (result.effective_order < max_n) result.flags |= kCandidateShorterThanN;
  double log_sum = 0.0;
  bool zero = false;
  for (int n = 1; n <= result.effective_order; ++n) {
    const auto cand = count_ngrams(candidate, n);
    const auto ref = count_ngrams(reference, n);
    const auto matched = clipped_overlap(cand, ref);
    const auto total = candidate.size() - static_cast<std::size_t>(n) + 1;
    const double p = static_cast<double>(matched) / static_cast<double>(total);
    result.precisions.push_back(p);
    if (matched == 0) {
      zero = true;
    } else {
      log_sum += std::log(p);
    }
  }
  if (candidate.size() < reference.size()) {
    result.brevity_penalty =
        std::exp(1.0 - static_cast<double>(reference.size()) / static_cast<double>(candidate.size()));
  }
  result.score = zero ? 0.0 : result.brevity_penalty * std::exp(log_sum / result.effective_order);
  return result;
}

CorpusBleu::CorpusBleu(int max_n) : max_n_(max_n) {
  if (max_n < 1) throw ConfigError(fmt::format("BLEU max_n must be >= 1, got {}", max_n));
  matched_.assign(static_cast<std::size_t>(max_n), 0);
  totals_.assign(static_cast<std::size_t>(max_n), 0);
}

void CorpusBleu::add(std::span<const std::string> candidate, std::span<const std::string> reference) {
  ++pairs_;
  candidate_length_ += candidate.size();
  reference_length_ += reference.size();
  for (int n = 1; n <= max_n_; ++n) {
    if (candidate.size() < static_cast<std::size_t>(n)) break;
    const auto idx = static_cast<std::size_t>(n - 1);
    matched_[idx] += clipped_overlap(count_ngrams(candidate, n), count_ngrams(reference, n));
    totals_[idx] += candidate.size() - static_cast<std::size_t>(n) + 1;
  }
}

double CorpusBleu::score() const {
  if (candidate_length_ == 0 || reference_length_ == 0) return 0.0;
  double log_sum = 0.0;
  int orders = 0;
  for (std::size_t i = 0; i < totals_.size(); ++i) {
    if (totals_[i] == 0) break;
    if (matched_[i] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matched_[i]) / static_cast<double>(totals_[i]));
    ++orders;
  }
  const double bp = candidate_length_ < reference_length_
                        ? std::exp(1.0 - static_cast<double>(reference_length_) /
                                             static_cast<double>(candidate_length_))
                        : 1.0;
  return bp * std::exp(log_sum / orders);
}

Prf rouge_n(std::span<const std::string> candidate, std::span<const std::string> reference, int n) {
  if (n < 1) throw ConfigError(fmt::format("ROUGE-N order must be >= 1, got {}", n));
  Prf result;
  const auto len = static_cast<std::size_t>(n);
  if (candidate.empty()) result.flags |= kEmptyCandidate;
  if (reference.empty()) result.flags |= kEmptyReference;
  if (!candidate.empty() && candidate.size() < len) result.flags |= kCandidateShorterThanN;
  if (!reference.empty() && reference.size() < len) result.flags |= kReferenceShorterThanN;
  if (candidate.size() < len || reference.size() < len) return result;

  const auto overlap = static_cast<double>(clipped_overlap(count_ngrams(candidate, n), count_ngrams(reference, n)));
  result.precision = overlap / static_cast<double>(candidate.size() - len + 1);
  result.recall = overlap / static_cast<double>(reference.size() - len + 1);
  result.f1 = harmonic_mean(result.precision, result.recall);
  return result;
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

Prf rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference) {
  Prf result;
  if (candidate.empty()) result.flags |= kEmptyCandidate;
  if (reference.empty()) result.flags |= kEmptyReference;
  if (result.flags != kNoFlags) return result;
  const auto l = static_cast<double>(lcs_length(candidate, reference));
  result.precision = l / static_cast<double>(candidate.size());
  result.recall = l / static_cast<double>(reference.size());
  result.f1 = harmonic_mean(result.precision, result.recall);
  return result;
}

}  // namespace storyend::metrics
