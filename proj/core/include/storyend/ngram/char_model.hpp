#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "storyend/common/error.hpp"

namespace storyend::ngram {

class ModelFormatError : public Error {
 public:
  using Error::Error;
};

inline constexpr std::size_t kDefaultMaxChars = 200;

/// Whether `cp` ends a generated sentence ('.', '!' or '?').
constexpr bool is_sentence_terminator(char32_t cp) noexcept {
  return cp == U'.' || cp == U'!' || cp == U'?';
}

/// Next-character distribution over Unicode code points.
struct CharDistribution {
  std::vector<std::pair<char32_t, double>> probs;  // ascending by code point
  std::size_t context_length = 0;                   // suffix length that answered
  bool uniform_fallback = false;                    // no suffix (not even "") was seen

  double probability(char32_t cp) const noexcept;
};

/// Count-based character model of order k: conditions on the k-1 preceding
/// code points, backing off to the longest seen suffix of the context and
/// finally to a uniform distribution over the alphabet. Immutable once fit.
class CharNgramModel {
 public:
  /// Counts every context of length 0..order-1 inside each text (never across
  /// text boundaries). Throws ConfigError when order < 2 or no text is non-empty.
  static CharNgramModel fit(std::span<const std::string> texts, int order);

  int order() const noexcept { return order_; }
  const std::vector<char32_t>& alphabet() const noexcept { return alphabet_; }
  /// Number of distinct contexts of the given length.
  std::size_t context_count(std::size_t length) const;

  CharDistribution next_char_distribution(std::u32string_view context) const;
  CharDistribution next_char_distribution(std::string_view context_utf8) const;

  /// Samples code points from next_char_distribution, conditioning on
  /// prime + output so far, until a sentence terminator or `max_chars`
  /// characters. Returns only the generated characters.
  std::string generate_sentence(std::uint64_t seed, std::string_view prime = {},
                                std::size_t max_chars = kDefaultMaxChars) const;

  /// Versioned text format; serialize(deserialize(s)) == s for any s this
  /// function produced.
  std::string serialize() const;
  static CharNgramModel deserialize(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static CharNgramModel load(const std::filesystem::path& path);

  bool operator==(const CharNgramModel&) const = default;

 private:
  struct Context {
    std::string key;  // UTF-8 context
    std::uint64_t total = 0;
    std::uint32_t first = 0;  // index into Level::successors
    std::uint32_t count = 0;
    bool operator==(const Context&) const = default;
  };
  struct Level {
    std::vector<Context> contexts;  // ascending by key
    std::vector<std::pair<char32_t, std::uint64_t>> successors;
    bool operator==(const Level&) const = default;
  };

  const Context* find(const Level& level, std::string_view key) const;
  CharDistribution distribution_of(const Level& level, const Context& ctx, std::size_t length) const;

  int order_ = 0;
  std::vector<char32_t> alphabet_;
  std::vector<Level> levels_;  // levels_[L] holds contexts of length L
};

}  // namespace storyend::ngram
