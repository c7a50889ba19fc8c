#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace storyend::metrics {

using Tokens = std::vector<std::string>;

/// Word segmentation shared by every metric and by the word language model.
/// Runs of letters/digits (any non-punctuation code point above ASCII counts
/// as a letter) form words; an apostrophe between two word characters stays
/// inside the word; every other punctuation character is its own token.
struct TokenizerConfig {
  bool lowercase = true;
};

Tokens tokenize(std::string_view text, const TokenizerConfig& config = {});

/// Lowercases ASCII, Latin-1, Latin Extended-A, basic Greek and Cyrillic.
char32_t to_lower(char32_t cp) noexcept;

}  // namespace storyend::metrics
