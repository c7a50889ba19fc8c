#include <benchmark/benchmark.h>

#include "storyend/corpus/corpus.hpp"
#include "storyend/corpus/synthetic.hpp"
#include "storyend/ngram/char_model.hpp"
#include "storyend/ngram/word_lm.hpp"

namespace {

using namespace storyend;

std::vector<std::string> texts(std::size_t n) {
  const auto corpus = corpus::synthesize_corpus({n, 2});
  std::vector<std::string> out;
  for (const auto& s : corpus) out.push_back(corpus::full_text(s));
  return out;
}

void BM_CharModelFit(benchmark::State& state) {
  const auto t = texts(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(ngram::CharNgramModel::fit(t, 10));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CharModelFit)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_CharModelGenerate(benchmark::State& state) {
  const auto model = ngram::CharNgramModel::fit(texts(1000), static_cast<int>(state.range(0)));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(model.generate_sentence(seed++));
}
BENCHMARK(BM_CharModelGenerate)->Arg(3)->Arg(10);

void BM_WordLmScore(benchmark::State& state) {
  const auto t = texts(1000);
  const auto lm = ngram::WordNgramLm::fit(t, 3, 0.1);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(lm.score(t[i++ % t.size()]));
}
BENCHMARK(BM_WordLmScore);

}  // namespace

BENCHMARK_MAIN();
