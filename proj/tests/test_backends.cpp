#include <gtest/gtest.h>

#include <atomic>
#include <mutex>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "mock_server.hpp"
#include "storyend/backends/backends.hpp"
#include "storyend/common/jsonl.hpp"
#include "storyend/common/rng.hpp"

using namespace storyend;
using namespace storyend::backends;
using storyend::testing::make_story;
using storyend::testing::MockReply;
using storyend::testing::MockServer;
using storyend::testing::TempDir;

namespace {

const std::string kNickBody =
    "Nick's old smart phone was very slow. He researched his options for a new smartphone. "
    "Nick went to the store. He purchased a much faster smartphone.";

RemoteChatSettings mock_settings(const MockServer& server) {
  RemoteChatSettings s;
  s.endpoint = http::Endpoint{server.base_url(), "/v1/chat/completions", "", std::chrono::milliseconds(5000)};
  s.retry.initial_delay = std::chrono::milliseconds(1);
  return s;
}

std::string chat_reply(const std::string& content) {
  return nlohmann::json{{"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}}}}}
      .dump();
}

std::string last_words(const std::string& text, std::size_t n) {
  std::istringstream in(text);
  std::vector<std::string> words;
  for (std::string w; in >> w;) words.push_back(w);
  std::string out;
  for (std::size_t i = words.size() > n ? words.size() - n : 0; i < words.size(); ++i) {
    if (!out.empty()) out += ' ';
    out += words[i];
  }
  return out;
}

}  // namespace

TEST(Prompt, GptTemplateWithExampleBody) {
  const auto t = builtin_template("gpt");
  ASSERT_TRUE(t);
  EXPECT_EQ(render_prompt(*t, kNickBody),
            "Write a conclusion to the following story: Nick's old smart phone was very slow. He researched his "
            "options for a new smartphone. Nick went to the store. He purchased a much faster smartphone.");
}

TEST(Prompt, MambaTemplateIsASuffix) {
  const auto t = builtin_template("mamba");
  ASSERT_TRUE(t);
  EXPECT_EQ(render_prompt(*t, kNickBody),
            kNickBody + " Complete this story by generating its last line to give it a logical ending:");
}

TEST(Prompt, IdentityAndValidation) {
  EXPECT_EQ(render_prompt(PromptTemplate{"p", "{body}"}, "x"), "x");
  EXPECT_EQ(render_prompt(*builtin_template("plain"), "x"), "x");
  EXPECT_THROW(render_prompt(PromptTemplate{"p", "{body}"}, ""), ConfigError);
  EXPECT_THROW(PromptTemplate({"p", "no placeholder"}).validate(), ConfigError);
  EXPECT_THROW(PromptTemplate({"p", "{body} {body}"}).validate(), ConfigError);
  EXPECT_FALSE(builtin_template("nope"));
  // Braces inside the body are not placeholders.
  EXPECT_EQ(render_prompt(PromptTemplate{"p", "<{body}>"}, "{body}"), "<{body}>");
}

TEST(RandomSelection, SingletonPoolAndDeterminism) {
  const std::vector<std::string> one{"Only one."};
  for (std::uint64_t seed : {0ull, 1ull, 99ull}) EXPECT_EQ(random_selection_ending(one, 5, seed), "Only one.");
  const std::vector<std::string> pool{"a", "b", "c", "d", "e", "f"};
  for (std::uint64_t i = 0; i < 50; ++i) {
    EXPECT_EQ(random_selection_ending(pool, i, 3), random_selection_ending(pool, i, 3));
  }
  EXPECT_THROW(random_selection_ending(std::vector<std::string>{}, 0, 0), ConfigError);
}

TEST(RandomSelection, RoughlyFairOverTwoItems) {
  const std::vector<std::string> pool{"x", "y"};
  int xs = 0;
  for (std::uint64_t i = 0; i < 1000; ++i) xs += random_selection_ending(pool, i, 1) == "x";
  EXPECT_GE(xs, 450);
  EXPECT_LE(xs, 550);
}

TEST(RandomSelection, SeedChangesTheStream) {
  std::vector<std::string> pool;
  for (int i = 0; i < 100; ++i) pool.push_back(std::to_string(i));
  int same = 0;
  for (std::uint64_t i = 0; i < 200; ++i) same += random_selection_ending(pool, i, 1) == random_selection_ending(pool, i, 2);
  EXPECT_LT(same, 20);
}

TEST(CharNgram, PairedModeContinuesTheBody) {
  // order 3: every two-character context has exactly one continuation.
  const std::vector<std::string> texts{"xyz.", "abcd."};
  const auto model = ngram::CharNgramModel::fit(texts, 3);
  EXPECT_EQ(char_ngram_ending(model, "the end is ab", 0, NgramMode::kPaired), "cd.");
  EXPECT_EQ(char_ngram_ending(model, "xy", 17, NgramMode::kPaired), "z.");
}

TEST(CharNgram, UnpairedModeIgnoresTheBody) {
  const std::vector<std::string> texts{"The cat sat.", "A dog ran off!", "She went home?"};
  const auto model = ngram::CharNgramModel::fit(texts, 4);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EXPECT_EQ(char_ngram_ending(model, "first body", seed, NgramMode::kUnpaired),
              char_ngram_ending(model, "another body entirely", seed, NgramMode::kUnpaired));
  }
}

TEST(CharNgram, HundredUnpairedSentences) {
  const std::vector<std::string> texts{"Tom went to the park and played ball.", "Amy baked a cake for her mom!",
                                       "Was it going to rain today?", "The dog ran after the red car."};
  const auto model = ngram::CharNgramModel::fit(texts, 5);
  const std::size_t max_chars = 60;
  std::set<std::string> distinct;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = char_ngram_ending(model, "", seed, NgramMode::kUnpaired, max_chars);
    ASSERT_FALSE(s.empty());
    const bool terminated = ngram::is_sentence_terminator(static_cast<unsigned char>(s.back()));
    EXPECT_TRUE(terminated || s.size() <= max_chars) << s;
    EXPECT_LE(s.size(), max_chars);
    distinct.insert(s);
  }
  EXPECT_GT(distinct.size(), 1u);
}

TEST(CharNgram, BackendStreamsSeedsPerStory) {
  const std::vector<std::string> texts{"The cat sat.", "A dog ran off!", "She went home?"};
  auto model = std::make_shared<const ngram::CharNgramModel>(ngram::CharNgramModel::fit(texts, 3));
  CharNgramBackend backend(model, 11, NgramMode::kUnpaired, 200);
  const auto story = make_story("s", {"a.", "b.", "c.", "d.", "e."});
  for (std::size_t i = 0; i < 10; ++i) {
    GenerationRequest req{story, i, "a. b. c. d.", "a. b. c. d."};
    EXPECT_EQ(backend.generate(req), char_ngram_ending(*model, "", stream_seed(11, i), NgramMode::kUnpaired));
  }
}

TEST(Echo, ReturnsTheGoldEnding) {
  EchoBackend echo;
  const auto story = make_story("s1", {"One.", "Two.", "Three.", "Four.", "  The   end. "});
  GenerationRequest req{story, 0, "One. Two. Three. Four.", ""};
  EXPECT_EQ(echo.generate(req), corpus::segment_story(story).ending);
}

TEST(FirstSentence, CutsAtTheFirstTerminator) {
  EXPECT_EQ(first_sentence("  He smiled. Then he left."), "He smiled.");
  EXPECT_EQ(first_sentence("no terminator "), "no terminator");
  EXPECT_EQ(first_sentence("Why? Because."), "Why?");
}

TEST(RemoteChat, MockEchoesTheLastFiveWords) {
  TempDir dir;
  std::vector<nlohmann::json> requests;
  std::mutex m;
  MockServer server([&](const std::string&, const nlohmann::json& body) {
    std::lock_guard lock(m);
    requests.push_back(body);
    return MockReply{200, chat_reply("  " + last_words(body["messages"][0]["content"], 5) + "\n")};
  });
  auto archive = std::make_shared<http::ExchangeArchive>(dir / "exchanges.jsonl");
  ChatClient client(mock_settings(server), http::make_default_transport(), archive);
  const auto prompt = render_prompt(*builtin_template("gpt"), kNickBody);
  EXPECT_EQ(remote_chat_ending(client, prompt), "purchased a much faster smartphone.");

  ASSERT_EQ(requests.size(), 1u);
  const auto& req = requests[0];
  ASSERT_EQ(req["messages"].size(), 1u);
  EXPECT_EQ(req["messages"][0]["role"], "user");
  EXPECT_EQ(req["messages"][0]["content"], prompt);
  EXPECT_EQ(req["model"], "gpt-3.5-turbo");
  EXPECT_DOUBLE_EQ(req["temperature"].get<double>(), 0.7);
  EXPECT_EQ(req["max_tokens"], 60);

  const auto archived = read_jsonl(dir / "exchanges.jsonl").records;
  ASSERT_EQ(archived.size(), 1u);
  EXPECT_EQ(archived[0]["request"], req);
  EXPECT_EQ(archived[0]["status"], 200);
  EXPECT_TRUE(archived[0]["response"].contains("choices"));
}

TEST(RemoteChat, RateLimitedTwiceThenSucceeds) {
  TempDir dir;
  std::atomic<int> calls{0};
  MockServer server([&](const std::string&, const nlohmann::json&) {
    if (++calls <= 2) return MockReply{429, R"({"error":"slow down"})"};
    return MockReply{200, chat_reply("Fine.")};
  });
  auto archive = std::make_shared<http::ExchangeArchive>(dir / "ex.jsonl");
  std::vector<std::chrono::milliseconds> waits;
  ChatClient client(mock_settings(server), http::make_default_transport(), archive,
                    [&](std::chrono::milliseconds d) { waits.push_back(d); });
  const auto result = client.complete("prompt");
  EXPECT_EQ(result.text, "Fine.");
  EXPECT_EQ(result.attempts, 3);
  EXPECT_EQ(waits.size(), 2u);
  const auto archived = read_jsonl(dir / "ex.jsonl").records;
  ASSERT_EQ(archived.size(), 3u);
  EXPECT_EQ(archived[0]["status"], 429);
  EXPECT_EQ(archived[2]["attempt"], 3);
}

TEST(RemoteChat, EmptyOrMalformedBodiesFail) {
  for (const std::string body : {chat_reply("   "), std::string(R"({"choices":[]})"), std::string("not json"),
                                 std::string(R"({"choices":[{"message":{"content":7}}]})")}) {
    MockServer server([&](const std::string&, const nlohmann::json&) { return MockReply{200, body}; });
    ChatClient client(mock_settings(server), http::make_default_transport(), nullptr);
    EXPECT_THROW(client.complete("p"), http::RemoteError) << body;
  }
}

TEST(RemoteChat, FinalStatusIsNotRetried) {
  MockServer server([](const std::string&, const nlohmann::json&) { return MockReply{400, "{}"}; });
  ChatClient client(mock_settings(server), http::make_default_transport(), nullptr);
  try {
    client.complete("p");
    FAIL();
  } catch (const http::RemoteError& e) {
    EXPECT_EQ(e.status(), 400);
    EXPECT_EQ(e.attempts(), 1);
  }
}

TEST(RemoteChat, FirstSentenceFlag) {
  MockServer server([](const std::string&, const nlohmann::json&) {
    return MockReply{200, chat_reply("He was happy. Then more text.")};
  });
  auto settings = mock_settings(server);
  auto story = make_story("s", {"a.", "b.", "c.", "d.", "e."});
  GenerationRequest req{story, 0, "a. b. c. d.", "p"};
  RemoteChatBackend verbatim(std::make_shared<ChatClient>(settings, http::make_default_transport(), nullptr));
  EXPECT_EQ(verbatim.generate(req), "He was happy. Then more text.");
  settings.first_sentence_only = true;
  settings.concurrency = 3;
  RemoteChatBackend cut(std::make_shared<ChatClient>(settings, http::make_default_transport(), nullptr));
  EXPECT_EQ(cut.generate(req), "He was happy.");
  EXPECT_EQ(cut.max_in_flight(), 3u);
}

TEST(Config, JsonRoundTripAndValidation) {
  BackendConfig c;
  c.backend_id = "char10";
  c.kind = BackendKind::kCharNgram;
  c.seed = 42;
  c.ngram_mode = NgramMode::kPaired;
  c.pool = PoolSource::kTrain;
  const auto back = backend_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_NO_THROW(c.validate());

  c.ngram_order = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c.ngram_order = 10;
  c.backend_id = "a/b";
  EXPECT_THROW(c.validate(), ConfigError);

  BackendConfig r;
  r.backend_id = "gpt";
  r.kind = BackendKind::kRemoteChat;
  EXPECT_EQ(r.prompt_template().name, "gpt");
  r.remote.concurrency = 0;
  EXPECT_THROW(r.validate(), ConfigError);
  EXPECT_THROW(parse_backend_kind("mamba"), ConfigError);
}

TEST(Records, EmptyEndingIsRejectedOnRead) {
  GenerationRecord rec{"s", "b", "p", "e", "2024-01-01T00:00:00.000Z"};
  EXPECT_EQ(generation_record_from_json(to_json(rec)), rec);
  rec.ending.clear();
  EXPECT_THROW(generation_record_from_json(to_json(rec)), Error);
}

TEST(Factory, LocalBackendsAreDeterministicAcrossInstances) {
  corpus::Corpus corpus;
  for (int i = 0; i < 30; ++i) {
    corpus.add(make_story("s" + std::to_string(i),
                          {"Sam woke up.", "He ate food.", "He went out.", "It was cold.",
                           "Sam went home " + std::to_string(i) + "."}));
  }
  BackendResources res;
  res.corpus = &corpus;
  res.train = &corpus;
  for (auto kind : {BackendKind::kRandomSelection, BackendKind::kCharNgram, BackendKind::kEcho}) {
    BackendConfig c;
    c.backend_id = "b";
    c.kind = kind;
    c.seed = 9;
    c.ngram_order = 4;
    auto a = make_backend(c, res);
    auto b = make_backend(c, res);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      const auto& story = corpus.stories()[i];
      const auto seg = corpus::segment_story(story);
      GenerationRequest req{story, i, seg.body, seg.body};
      const auto out = a->generate(req);
      EXPECT_FALSE(out.empty());
      EXPECT_EQ(out, b->generate(req));
    }
  }
}
