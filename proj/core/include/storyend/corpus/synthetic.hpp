#pragma once

#include <cstdint>

#include "storyend/corpus/corpus.hpp"

namespace storyend::corpus {

struct SyntheticOptions {
  std::size_t stories = 1000;
  std::uint64_t seed = 0;
};

/// Deterministic template-based five-sentence stories in the shape of the
/// ROCStories layout (ids, titles, everyday topics). Used wherever the real
/// corpus is unavailable: tests, benchmarks and the demo pipeline.
Corpus synthesize_corpus(const SyntheticOptions& options);

}  // namespace storyend::corpus
