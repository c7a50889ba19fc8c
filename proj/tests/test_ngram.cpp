#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <regex>
#include <set>

#include "fixtures.hpp"
#include "storyend/common/rng.hpp"
#include "storyend/common/utf8.hpp"
#include "storyend/corpus/synthetic.hpp"
#include "storyend/metrics/metrics.hpp"
#include "storyend/metrics/tokenizer.hpp"
#include "storyend/ngram/char_model.hpp"
#include "storyend/ngram/word_lm.hpp"

using namespace storyend;
using namespace storyend::ngram;

namespace {

// Independent count oracle: P(c | ctx) from raw occurrences of ctx followed by c
// inside each text.
std::map<char32_t, double> count_oracle(const std::vector<std::string>& texts, const std::u32string& ctx) {
  std::map<char32_t, double> counts;
  double total = 0;
  for (const auto& t : texts) {
    const auto cps = utf8::decode(t);
    for (std::size_t i = ctx.size(); i < cps.size(); ++i) {
      if (std::u32string_view(cps).substr(i - ctx.size(), ctx.size()) == ctx) {
        counts[cps[i]] += 1;
        total += 1;
      }
    }
  }
  for (auto& [c, v] : counts) v /= total;
  return counts;
}

double total_probability(const CharDistribution& d) {
  double sum = 0;
  for (const auto& [c, p] : d.probs) sum += p;
  return sum;
}

std::vector<std::string> story_texts(std::size_t n, std::uint64_t seed) {
  std::vector<std::string> texts;
  for (const auto& s : corpus::synthesize_corpus({n, seed})) texts.push_back(corpus::full_text(s));
  return texts;
}

}  // namespace

TEST(CharModel, AaabCountsMatchOracle) {
  const std::vector<std::string> texts{"aaab."};
  const auto model = CharNgramModel::fit(texts, 3);
  const auto d = model.next_char_distribution(std::string_view("aa"));
  EXPECT_DOUBLE_EQ(d.probability(U'a'), 0.5);
  EXPECT_DOUBLE_EQ(d.probability(U'b'), 0.5);
  EXPECT_EQ(d.probs.size(), 2u);
  const auto oracle = count_oracle(texts, U"aa");
  for (const auto& [c, p] : oracle) EXPECT_NEAR(d.probability(c), p, 1e-15);
}

TEST(CharModel, DeterministicCorpus) {
  const auto model = CharNgramModel::fit(std::vector<std::string>{"abababab"}, 3);
  const auto d = model.next_char_distribution(std::string_view("ab"));
  ASSERT_EQ(d.probs.size(), 1u);
  EXPECT_EQ(d.probs[0].first, U'a');
  EXPECT_DOUBLE_EQ(d.probs[0].second, 1.0);
}

TEST(CharModel, UnseenContextFallsBackToUnigram) {
  const auto model = CharNgramModel::fit(std::vector<std::string>{"abababab", "abc"}, 3);
  const auto unseen = model.next_char_distribution(std::string_view("zz"));
  const auto empty = model.next_char_distribution(std::string_view(""));
  EXPECT_EQ(unseen.probs, empty.probs);
  EXPECT_EQ(unseen.context_length, 0u);
  const auto oracle = count_oracle({"abababab", "abc"}, U"");
  for (const auto& [c, p] : oracle) EXPECT_NEAR(empty.probability(c), p, 1e-15);
}

TEST(CharModel, FitRejectsBadInput) {
  EXPECT_THROW(CharNgramModel::fit(std::vector<std::string>{"abc"}, 1), ConfigError);
  EXPECT_THROW(CharNgramModel::fit(std::vector<std::string>{}, 3), ConfigError);
  EXPECT_THROW(CharNgramModel::fit(std::vector<std::string>{"", ""}, 3), ConfigError);
}

TEST(CharModel, TextsAreNotConcatenated) {
  const auto model = CharNgramModel::fit(std::vector<std::string>{"ab", "cd"}, 2);
  // "b" is never followed by "c" because the texts are counted separately
  const auto d = model.next_char_distribution(std::string_view("b"));
  EXPECT_EQ(d.context_length, 0u);
}

TEST(CharModel, DistributionsSumToOneAndStayInAlphabet) {
  const auto texts = story_texts(60, 4);
  for (int order : {2, 4, 7}) {
    const auto model = CharNgramModel::fit(texts, order);
    const std::set<char32_t> alphabet(model.alphabet().begin(), model.alphabet().end());
    SplitMix64 rng(order);
    for (int trial = 0; trial < 200; ++trial) {
      const auto& t = texts[rng.below(texts.size())];
      const auto cps = utf8::decode(t);
      const auto end = rng.below(cps.size());
      const auto len = std::min<std::size_t>(end, order - 1);
      const auto ctx = std::u32string_view(cps).substr(end - len, len);
      const auto d = model.next_char_distribution(ctx);
      EXPECT_NEAR(total_probability(d), 1.0, 1e-12);
      for (const auto& [c, p] : d.probs) EXPECT_TRUE(alphabet.contains(c));
    }
    // a context made of unseen characters
    const auto odd = model.next_char_distribution(std::u32string_view(U"中文"));
    EXPECT_NEAR(total_probability(odd), 1.0, 1e-12);
  }
}

TEST(CharModel, SeenContextsNeverBackOff) {
  const auto texts = story_texts(40, 8);
  const int order = 5;
  const auto model = CharNgramModel::fit(texts, order);
  std::size_t checked = 0;
  for (const auto& t : texts) {
    const auto cps = utf8::decode(t);
    for (std::size_t i = order - 1; i < cps.size(); i += 7) {
      const auto ctx = std::u32string_view(cps).substr(i - (order - 1), order - 1);
      const auto d = model.next_char_distribution(ctx);
      ASSERT_EQ(d.context_length, static_cast<std::size_t>(order - 1));
      ASSERT_FALSE(d.uniform_fallback);
      ++checked;
    }
  }
  EXPECT_GT(checked, 100u);
}

TEST(CharModel, MatchesCountOracleOnSyntheticText) {
  const auto texts = story_texts(30, 2);
  const auto model = CharNgramModel::fit(texts, 4);
  SplitMix64 rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const auto cps = utf8::decode(texts[rng.below(texts.size())]);
    const auto end = 3 + rng.below(cps.size() - 3);
    const std::u32string ctx(cps.substr(end - 3, 3));
    const auto oracle = count_oracle(texts, ctx);
    const auto d = model.next_char_distribution(std::u32string_view(ctx));
    ASSERT_EQ(d.probs.size(), oracle.size());
    for (const auto& [c, p] : oracle) EXPECT_NEAR(d.probability(c), p, 1e-12);
  }
}

TEST(Generation, DeterministicChainRunsToTerminator) {
  const auto model = CharNgramModel::fit(std::vector<std::string>{"abababab."}, 3);
  const std::regex chain("^(ab)*\\.$");
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto out = model.generate_sentence(seed, "ab", 500);
    EXPECT_TRUE(std::regex_match(out, chain)) << out;
  }
}

TEST(Generation, MaxCharsOneGivesOneCharacter) {
  const auto model = CharNgramModel::fit(story_texts(10, 1), 4);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    EXPECT_EQ(utf8::decode(model.generate_sentence(seed, "", 1)).size(), 1u);
  }
}

TEST(Generation, SameSeedSameText) {
  const auto model = CharNgramModel::fit(story_texts(30, 1), 6);
  EXPECT_EQ(model.generate_sentence(5, "She", 200), model.generate_sentence(5, "She", 200));
}

TEST(Generation, OutputStaysInAlphabetAndStopsCorrectly) {
  const auto model = CharNgramModel::fit(story_texts(50, 3), 10);
  const std::set<char32_t> alphabet(model.alphabet().begin(), model.alphabet().end());
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto cps = utf8::decode(model.generate_sentence(seed));
    ASSERT_FALSE(cps.empty());
    for (char32_t c : cps) ASSERT_TRUE(alphabet.contains(c));
    const bool terminated = is_sentence_terminator(cps.back());
    ASSERT_TRUE(terminated || cps.size() == kDefaultMaxChars);
    for (std::size_t i = 0; i + 1 < cps.size(); ++i) ASSERT_FALSE(is_sentence_terminator(cps[i]));
  }
}

TEST(Serialization, RoundTripIsBitExact) {
  const auto model = CharNgramModel::fit(story_texts(40, 6), 7);
  const auto text = model.serialize();
  const auto back = CharNgramModel::deserialize(text);
  EXPECT_EQ(back, model);
  EXPECT_EQ(back.serialize(), text);
  storyend::testing::TempDir dir;
  model.save(dir / "m.txt");
  EXPECT_EQ(CharNgramModel::load(dir / "m.txt"), model);
}

TEST(Serialization, HandlesNonAsciiAndWhitespaceCharacters) {
  const auto model = CharNgramModel::fit(std::vector<std::string>{"caf\xC3\xA9 na\xC3\xAFve\ttab.", " -> \xF0\x9F\x98\x80"}, 3);
  EXPECT_EQ(CharNgramModel::deserialize(model.serialize()), model);
}

TEST(Serialization, CorruptInputIsRejected) {
  const auto text = CharNgramModel::fit(std::vector<std::string>{"abcabc."}, 3).serialize();
  EXPECT_THROW(CharNgramModel::deserialize(""), ModelFormatError);
  EXPECT_THROW(CharNgramModel::deserialize("storyend-char-ngram v9\n"), ModelFormatError);
  EXPECT_THROW(CharNgramModel::deserialize(text.substr(0, text.size() / 2)), ModelFormatError);
}

TEST(WordLm, BigramSmoothingArithmetic) {
  const auto lm = WordNgramLm::fit(std::vector<std::string>{"a b"}, 2, 1.0);
  EXPECT_EQ(lm.vocabulary_size(), 4u);
  const std::vector<std::string> start{"<s>"};
  EXPECT_DOUBLE_EQ(lm.probability(start, "a"), (1.0 + 1.0) / (1.0 + 4.0));
  EXPECT_DOUBLE_EQ(lm.probability(start, "b"), 1.0 / 5.0);
}

TEST(WordLm, UnseenContextIsUniform) {
  const auto lm = WordNgramLm::fit(std::vector<std::string>{"a b c"}, 2, 0.5);
  const std::vector<std::string> ctx{"zzz"};
  for (const auto& tok : lm.vocabulary()) {
    EXPECT_DOUBLE_EQ(lm.probability(ctx, tok), 1.0 / static_cast<double>(lm.vocabulary_size()));
  }
}

TEST(WordLm, ConditionalsSumToOneAndArePositive) {
  std::vector<std::string> texts;
  for (const auto& s : corpus::synthesize_corpus({40, 2})) texts.push_back(corpus::full_text(s));
  const auto lm = WordNgramLm::fit(texts, 3, 0.1);
  const auto vocab = lm.vocabulary();
  const std::vector<std::vector<std::string>> contexts{{"<s>", "<s>"}, {"<s>", "she"}, {"the", "new"}, {"x", "y"}};
  for (const auto& ctx : contexts) {
    double sum = 0;
    for (const auto& tok : vocab) {
      const double p = lm.probability(ctx, tok);
      ASSERT_GT(p, 0.0);
      sum += p;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(WordLm, FitRejectsBadParameters) {
  EXPECT_THROW(WordNgramLm::fit(std::vector<std::string>{"a"}, 0, 1.0), ConfigError);
  EXPECT_THROW(WordNgramLm::fit(std::vector<std::string>{"a"}, 2, 0.0), ConfigError);
  EXPECT_THROW(WordNgramLm::fit(std::vector<std::string>{}, 2, 1.0), ConfigError);
}

TEST(WordLm, OutOfVocabularyMapsToUnknownAndStaysFinite) {
  const auto lm = WordNgramLm::fit(std::vector<std::string>{"a b"}, 2, 1.0);
  const auto wrapped = lm.wrap("a qqq");
  EXPECT_EQ(wrapped, (std::vector<std::string>{"<s>", "a", "<unk>", "</s>"}));
  const auto lp = lm.score("qqq rrr");
  EXPECT_TRUE(std::isfinite(lp.log_prob));
  EXPECT_EQ(lp.token_count, 3u);
}

TEST(WordLm, DeterministicChainHasPerplexityOne) {
  const auto lm = WordNgramLm::fit_unsmoothed(std::vector<std::string>{"the cat sat on the mat"}, 3);
  const auto lp = lm.score("the cat sat on the mat");
  EXPECT_DOUBLE_EQ(lp.log_prob, 0.0);
  EXPECT_DOUBLE_EQ(std::exp(-lp.log_prob / static_cast<double>(lp.token_count)), 1.0);
}

TEST(WordLm, UniformScorerGivesVocabularySize) {
  const UniformScorer uniform(10);
  for (const char* text : {"", "a", "one two three four five."}) {
    const auto lp = uniform.score(text);
    EXPECT_NEAR(lp.log_prob / static_cast<double>(lp.token_count), -std::log(10.0), 1e-12);
    EXPECT_NEAR(metrics::perplexity(text, uniform), 10.0, 1e-9);
  }
}

TEST(WordLm, TrainingSentenceBeatsItsPermutations) {
  std::vector<std::string> texts;
  for (const auto& s : corpus::synthesize_corpus({200, 12})) texts.push_back(corpus::full_text(s));
  const auto lm = WordNgramLm::fit(texts, 3, 0.1);
  const auto& sentence = texts[3];
  const double original = lm.score(sentence).log_prob;
  auto tokens = metrics::tokenize(sentence);
  double sum = 0;
  for (std::uint64_t p = 0; p < 100; ++p) {
    auto shuffled = tokens;
    seeded_shuffle(shuffled, p);
    std::string joined;
    for (const auto& t : shuffled) joined += t + " ";
    sum += lm.score(joined).log_prob;
  }
  EXPECT_GT(original, sum / 100.0);
}

TEST(WordLm, PerplexityBridgeMatchesMetricsModule) {
  std::vector<std::string> texts;
  for (const auto& s : corpus::synthesize_corpus({50, 1})) texts.push_back(corpus::full_text(s));
  const auto lm = WordNgramLm::fit(texts, 3, 0.1);
  for (const auto& t : {std::string("She was happy."), texts[0], std::string("unknown words here"), std::string()}) {
    const auto lp = lm.score(t);
    const double direct = std::exp(-lp.log_prob / static_cast<double>(lp.token_count));
    EXPECT_NEAR(direct, metrics::perplexity(t, lm), 1e-9);
    EXPECT_GE(direct, 1.0);
  }
}
