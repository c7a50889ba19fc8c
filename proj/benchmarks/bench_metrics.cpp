#include <benchmark/benchmark.h>

#include "storyend/corpus/corpus.hpp"
#include "storyend/corpus/synthetic.hpp"
#include "storyend/embeddings/embeddings.hpp"
#include "storyend/metrics/metrics.hpp"
#include "storyend/ngram/word_lm.hpp"

namespace {

using namespace storyend;

struct Pairs {
  std::vector<std::string> candidates;
  std::vector<std::string> references;
};

const Pairs& pairs() {
  static const Pairs p = [] {
    const auto corpus = corpus::synthesize_corpus({512, 1});
    Pairs out;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      out.references.push_back(corpus.stories()[i].ending());
      out.candidates.push_back(corpus.stories()[(i * 7 + 3) % corpus.size()].ending());
    }
    return out;
  }();
  return p;
}

void BM_Tokenize(benchmark::State& state) {
  const auto& p = pairs();
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(metrics::tokenize(p.references[i++ % p.references.size()]));
  }
}
BENCHMARK(BM_Tokenize);

void BM_Bleu(benchmark::State& state) {
  const auto& p = pairs();
  std::vector<std::vector<std::string>> c, r;
  for (std::size_t i = 0; i < p.candidates.size(); ++i) {
    c.push_back(metrics::tokenize(p.candidates[i]));
    r.push_back(metrics::tokenize(p.references[i]));
  }
  std::size_t i = 0;
  for (auto _ : state) {
    const auto k = i++ % c.size();
    benchmark::DoNotOptimize(metrics::bleu(c[k], r[k]));
  }
}
BENCHMARK(BM_Bleu);

void BM_Meteor(benchmark::State& state) {
  const auto& p = pairs();
  std::vector<std::vector<std::string>> c, r;
  for (std::size_t i = 0; i < p.candidates.size(); ++i) {
    c.push_back(metrics::tokenize(p.candidates[i]));
    r.push_back(metrics::tokenize(p.references[i]));
  }
  std::size_t i = 0;
  for (auto _ : state) {
    const auto k = i++ % c.size();
    benchmark::DoNotOptimize(metrics::meteor(c[k], r[k]));
  }
}
BENCHMARK(BM_Meteor);

void BM_ScorePair(benchmark::State& state) {
  const auto& p = pairs();
  embeddings::OneHotEmbedder embedder;
  const auto lm = ngram::WordNgramLm::fit(p.references, 3, 0.1);
  const metrics::MetricConfig config;
  std::size_t i = 0;
  for (auto _ : state) {
    const auto k = i++ % p.candidates.size();
    benchmark::DoNotOptimize(metrics::score_pair(p.candidates[k], p.references[k], config, embedder, lm));
  }
}
BENCHMARK(BM_ScorePair);

}  // namespace
