#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <limits>
#include <set>

#include "fixtures.hpp"
#include "mock_server.hpp"
#include "storyend/common/jsonl.hpp"
#include "storyend/harness/config.hpp"
#include "storyend/harness/report.hpp"
#include "storyend/harness/run.hpp"

using namespace storyend;
using namespace storyend::harness;
using storyend::testing::make_story;
using storyend::testing::MockReply;
using storyend::testing::MockServer;
using storyend::testing::read_text;
using storyend::testing::run_config_text;
using storyend::testing::TempDir;
using storyend::testing::write_synthetic_corpus;
using storyend::testing::write_text;
namespace fs = std::filesystem;

namespace {

const char* kEcho = "[backend:echo]\nkind = echo\n";
const char* kTwoLocal =
    "[backend:random]\nkind = random_selection\n\n[backend:echo]\nkind = echo\n";

FixedClock fixed_clock() { return FixedClock(parse_timestamp("2024-01-01T00:00:00.000Z")); }

RunConfig setup_run(const TempDir& dir, const fs::path& run_dir, std::size_t stories, const std::string& backends,
                    std::size_t test_limit = 0) {
  const auto corpus = write_synthetic_corpus(dir.path(), stories, 3);
  auto config = parse_run_config(run_config_text(corpus, backends, 7, test_limit), dir.path());
  const auto clock = fixed_clock();
  create_or_open_manifest(run_dir, config, clock);
  return config;
}

ScoredRecord scored(const std::string& story, const std::string& backend, double v) {
  ScoredRecord r{story, backend, {}};
  r.scores.bleu = v;
  r.scores.rouge1_f = v;
  r.scores.meteor = v;
  r.scores.bert_f1 = v;
  r.scores.perplexity = 10 * v + 1;
  return r;
}

}  // namespace

TEST(Config, ParsesEverySection) {
  const std::string ini =
      "[run]\nid = demo\nseed = 11\nclock = fixed\n\n"
      "[corpus]\npaths = a.csv, sub/b.csv\n\n"
      "[split]\ntrain_fraction = 0.8\nseed = 5\ntest_limit = 50\n\n"
      "[metrics]\nlowercase = false\nbleu_max_n = 2\nrouge_n = 1,2,3\n\n"
      "[scorer]\nkind = word_lm\norder = 2\nalpha = 0.5\n\n"
      "[backend:gpt]\nkind = remote_chat\nmodel = gpt-4o-mini\ntemperature = 0\nmax_tokens = 30\n"
      "concurrency = 2\nmax_attempts = 3\n\n"
      "[backend:char10]\nkind = char_ngram\norder = 10\nmode = paired\n";
  const auto c = parse_run_config(ini, "/data");
  EXPECT_EQ(c.run_id, "demo");
  EXPECT_EQ(c.seed, 11u);
  ASSERT_EQ(c.corpus_paths.size(), 2u);
  EXPECT_EQ(c.corpus_paths[1], fs::path("/data/sub/b.csv"));
  EXPECT_EQ(c.split.train_fraction, (corpus::Fraction{4, 5}));
  EXPECT_EQ(c.split.seed, 5u);
  EXPECT_EQ(c.test_limit, 50u);
  EXPECT_FALSE(c.metrics.tokenizer.lowercase);
  EXPECT_EQ(c.metrics.bleu_max_n, 2);
  EXPECT_EQ(c.metrics.rouge_n_orders, (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(c.scorer.order, 2);
  ASSERT_EQ(c.backends.size(), 2u);
  EXPECT_EQ(c.backends[0].backend_id, "gpt");
  EXPECT_EQ(c.backends[0].seed, 11u);  // inherited from [run]
  EXPECT_EQ(c.backends[0].remote.model, "gpt-4o-mini");
  EXPECT_EQ(c.backends[0].remote.retry.max_attempts, 3);
  EXPECT_EQ(c.backends[1].ngram_mode, backends::NgramMode::kPaired);
  EXPECT_EQ(c.clock.mode, "fixed");
  EXPECT_EQ(to_json(run_config_from_json(to_json(c))), to_json(c));
}

TEST(Config, RejectsMistakes) {
  const std::string head = "[corpus]\npaths = a.csv\n\n";
  EXPECT_THROW(parse_run_config(head + "[backend:x]\nkind = echo\ncolour = red\n", "."), ConfigError);
  EXPECT_THROW(parse_run_config(head + "[backends]\nkind = echo\n", "."), ConfigError);
  EXPECT_THROW(parse_run_config(head, "."), ConfigError);  // no backends
  EXPECT_THROW(parse_run_config(head + "[backend:x]\nkind = telepathy\n", "."), ConfigError);
  EXPECT_THROW(parse_run_config(head + "[split]\ntrain_fraction = 3/2\n[backend:x]\nkind = echo\n", "."),
               ConfigError);
  EXPECT_THROW(parse_run_config(head + "[run]\nseed = -4\n[backend:x]\nkind = echo\n", "."), ConfigError);
  EXPECT_THROW(parse_run_config("[corpus\npaths = x\n", "."), ConfigError);
}

TEST(Manifest, DifferentConfigNeedsANewDirectory) {
  TempDir dir;
  const auto run_dir = dir / "run";
  auto config = setup_run(dir, run_dir, 50, kEcho);
  const auto clock = fixed_clock();
  EXPECT_NO_THROW(create_or_open_manifest(run_dir, config, clock));
  config.seed = 99;
  EXPECT_THROW(create_or_open_manifest(run_dir, config, clock), ConfigError);
}

TEST(Manifest, EditedCorpusMakesTheRunStale) {
  TempDir dir;
  const auto run_dir = dir / "run";
  const auto config = setup_run(dir, run_dir, 50, kEcho);
  EXPECT_NO_THROW(open_run(run_dir));
  const auto path = config.corpus_paths.at(0);
  auto text = read_text(path);
  text.replace(text.rfind('.'), 1, "!");
  write_text(path, text);
  EXPECT_THROW(open_run(run_dir), StaleRunError);
  EXPECT_THROW(run_generation(run_dir), StaleRunError);
}

TEST(Generation, ResumesWithoutDuplicates) {
  TempDir dir;
  const auto run_dir = dir / "run";
  setup_run(dir, run_dir, 100, kEcho);  // 20 test stories
  GenerationOptions opts;
  opts.max_new_records = 10;
  auto first = run_generation(run_dir, opts);
  EXPECT_EQ(first.generated, 10u);
  EXPECT_EQ(first.remaining, 10u);
  EXPECT_TRUE(open_run(run_dir).manifest.finished_at.empty());

  auto second = run_generation(run_dir);
  EXPECT_EQ(second.existing, 10u);
  EXPECT_EQ(second.generated, 10u);
  EXPECT_TRUE(second.complete());
  EXPECT_FALSE(open_run(run_dir).manifest.finished_at.empty());

  const auto records = read_generation_records(RunPaths{run_dir}.generations()).records;
  ASSERT_EQ(records.size(), 20u);
  std::set<std::string> ids;
  for (const auto& r : records) ids.insert(r.story_id);
  EXPECT_EQ(ids.size(), 20u);

  EXPECT_EQ(run_generation(run_dir).generated, 0u);
}

TEST(Generation, InterruptedRunMatchesUninterruptedBytes) {
  TempDir dir;
  const auto a = dir / "a";
  const auto b = dir / "b";
  setup_run(dir, a, 100, kTwoLocal);
  setup_run(dir, b, 100, kTwoLocal);
  run_generation(a);
  GenerationOptions step;
  step.max_new_records = 7;
  while (!run_generation(b, step).complete()) {
  }
  EXPECT_EQ(read_text(RunPaths{a}.generations()), read_text(RunPaths{b}.generations()));
}

TEST(Generation, TornTailIsRepaired) {
  TempDir dir;
  const auto run_dir = dir / "run";
  setup_run(dir, run_dir, 100, kEcho);
  GenerationOptions opts;
  opts.max_new_records = 5;
  run_generation(run_dir, opts);
  const auto gen = RunPaths{run_dir}.generations();
  write_text(gen, read_text(gen) + R"({"story_id":"half)");
  const auto s = run_generation(run_dir);
  EXPECT_TRUE(s.repaired_tail);
  EXPECT_EQ(s.existing, 5u);
  EXPECT_EQ(read_generation_records(gen).records.size(), 20u);
}

TEST(Generation, EchoEndingsEqualGoldEndings) {
  TempDir dir;
  const auto run_dir = dir / "run";
  setup_run(dir, run_dir, 100, kEcho);
  run_generation(run_dir);
  const auto run = open_run(run_dir);
  const auto records = read_generation_records(RunPaths{run_dir}.generations()).records;
  ASSERT_EQ(records.size(), run.evaluated.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(records[i].story_id, run.evaluated[i]->id);
    EXPECT_EQ(records[i].ending, corpus::segment_story(*run.evaluated[i]).ending);
    EXPECT_EQ(records[i].created_at, "2024-01-01T00:00:00.000Z");
  }
}

TEST(Generation, TwoBackendsOverFiveStories) {
  TempDir dir;
  const auto run_dir = dir / "run";
  setup_run(dir, run_dir, 100, kTwoLocal, 5);
  GenerationOptions opts;
  opts.local_workers = 3;
  const auto s = run_generation(run_dir, opts);
  EXPECT_EQ(s.generated, 10u);
  const auto records = read_generation_records(RunPaths{run_dir}.generations()).records;
  ASSERT_EQ(records.size(), 10u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(records[i].backend_id, "random");
  for (std::size_t i = 5; i < 10; ++i) EXPECT_EQ(records[i].backend_id, "echo");
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(records[i].story_id, records[i + 5].story_id);
}

TEST(Generation, RemoteFailuresAreRecordedNotFatal) {
  TempDir dir;
  std::atomic<int> calls{0};
  MockServer server([&](const std::string&, const nlohmann::json& body) {
    // every third request is refused outright
    if (++calls % 3 == 0) return MockReply{400, R"({"error":"bad"})"};
    const auto content = body["messages"][0]["content"].get<std::string>();
    return MockReply{200, nlohmann::json{{"choices", {{{"message", {{"content", "Done " + content.substr(0, 5)}}}}}}}
                              .dump()};
  });
  const auto backend = "[backend:gpt]\nkind = remote_chat\nbase_url = " + server.base_url() +
                       "\napi_key_env =\nconcurrency = 2\ninitial_delay_ms = 1\n";
  const auto run_dir = dir / "run";
  setup_run(dir, run_dir, 50, backend, 6);
  const auto s = run_generation(run_dir);
  EXPECT_EQ(s.generated + s.failed, 6u);
  EXPECT_EQ(s.failed, 2u);
  EXPECT_EQ(s.remaining, 2u);
  const RunPaths paths{run_dir};
  EXPECT_EQ(read_failures(paths.failures()).size(), 2u);
  EXPECT_EQ(read_jsonl(paths.exchanges()).records.size(), 6u);
  // failed items are retried on the next invocation
  const auto again = run_generation(run_dir);
  EXPECT_EQ(again.existing, 4u);
  EXPECT_EQ(again.generated + again.failed, 2u);
}

TEST(Evaluation, UnresolvableIdsAreSkipped) {
  corpus::Corpus corpus;
  corpus.add(make_story("s1", {"A.", "B.", "C.", "D.", "The cat sat down."}));
  const std::vector<backends::GenerationRecord> records{
      {"s1", "b", "p", "The cat sat down.", "t"}, {"ghost", "b", "p", "x", "t"}};
  embeddings::OneHotEmbedder embedder;
  const ngram::UniformScorer scorer(10);
  const auto result = evaluate_records(records, corpus, {}, embedder, scorer);
  ASSERT_EQ(result.scored.size(), 1u);
  ASSERT_EQ(result.skipped.size(), 1u);
  EXPECT_NE(result.skipped[0].find("ghost"), std::string::npos);
  EXPECT_DOUBLE_EQ(result.scored[0].scores.bleu, 1.0);
  EXPECT_DOUBLE_EQ(result.scored[0].scores.perplexity, 10.0);
}

TEST(Evaluation, EchoRunScoresAtTheCeiling) {
  TempDir dir;
  const auto run_dir = dir / "run";
  setup_run(dir, run_dir, 100, kTwoLocal);
  run_generation(run_dir);
  const auto result = run_evaluation(run_dir);
  EXPECT_TRUE(result.skipped.empty());
  const auto report = aggregate_report(result.scored);
  ASSERT_EQ(report.rows.size(), 2u);
  const auto& echo = report.rows[1];
  EXPECT_EQ(echo.backend_id, "echo");
  EXPECT_DOUBLE_EQ(echo.bleu, 1.0);
  EXPECT_DOUBLE_EQ(echo.rouge1_f, 1.0);
  EXPECT_NEAR(echo.bert_f1, 1.0, 1e-12);
  EXPECT_LT(report.rows[0].bleu, echo.bleu);
  EXPECT_EQ(read_scored_records(RunPaths{run_dir}.scores()), result.scored);
  EXPECT_TRUE(fs::exists(RunPaths{run_dir}.evaluation()));
}

TEST(Report, MeansAndRowOrder) {
  const std::vector<ScoredRecord> recs{scored("s1", "b", 0.0), scored("s2", "b", 1.0), scored("s1", "solo", 0.25)};
  const auto report = aggregate_report(recs);
  ASSERT_EQ(report.rows.size(), 2u);
  EXPECT_DOUBLE_EQ(report.rows[0].bleu, 0.5);
  EXPECT_DOUBLE_EQ(report.rows[0].perplexity, 6.0);
  EXPECT_EQ(report.rows[0].count, 2u);
  EXPECT_DOUBLE_EQ(report.rows[1].bleu, 0.25);
  EXPECT_NE(report.rows[0].subset_digest, report.rows[1].subset_digest);
  bool flagged = false;
  for (const auto& n : report.notes) flagged |= n.find("different story subsets") != std::string::npos;
  EXPECT_TRUE(flagged);

  const auto table = render_report(report, ReportFormat::kTable);
  std::vector<std::size_t> at;
  for (const char* label : {"BERT", "METEOR", "BLEU", "ROUGE", "Perplexity", "Human Score"}) {
    at.push_back(table.find(label));
    EXPECT_NE(at.back(), std::string::npos) << label;
  }
  EXPECT_TRUE(std::is_sorted(at.begin(), at.end()));
}

TEST(Report, ExpectedBackendsFixOrderAndMustExist) {
  const std::vector<ScoredRecord> recs{scored("s1", "a", 0.1), scored("s1", "b", 0.2)};
  const std::vector<std::string> order{"b", "a"};
  EXPECT_EQ(aggregate_report(recs, {}, {}, order).rows[0].backend_id, "b");
  const std::vector<std::string> missing{"a", "b", "c"};
  EXPECT_THROW(aggregate_report(recs, {}, {}, missing), Error);
  EXPECT_THROW(aggregate_report(std::vector<ScoredRecord>{}), Error);
}

TEST(Report, Formatting) {
  EXPECT_EQ(format_score(140.0536), "140.054");
  EXPECT_EQ(format_score(0.0), "0.000");
  EXPECT_EQ(format_score(-0.0), "0.000");
  EXPECT_EQ(parse_report_format("csv"), ReportFormat::kDelimited);
  EXPECT_THROW(parse_report_format("yaml"), ConfigError);
}

TEST(Report, DeterministicAndRoundTrips) {
  const std::vector<ScoredRecord> recs{scored("s1", "b", 0.125), scored("s2", "b", 0.5), scored("s1", "c", 0.3)};
  const std::map<std::string, double> human{{"b", 4.2}};
  const auto r1 = aggregate_report(recs, human);
  const auto r2 = aggregate_report(recs, human);
  for (auto f : {ReportFormat::kTable, ReportFormat::kDelimited, ReportFormat::kJson}) {
    EXPECT_EQ(render_report(r1, f), render_report(r2, f));
  }
  EXPECT_EQ(report_from_json(to_json(r1)), r1);
  EXPECT_EQ(r1.rows[0].human_score, 4.2);
  EXPECT_FALSE(r1.rows[1].human_score.has_value());
  const auto csv = render_report(r1, ReportFormat::kDelimited);
  EXPECT_NE(csv.find("Human Score,4.200,"), std::string::npos) << csv;
}

TEST(Records, ScoredRecordJsonRoundTrip) {
  auto r = scored("s", "b", 0.3);
  r.scores.rouge_n_f = {{1, 0.3}, {3, 0.1}};
  r.scores.flags = metrics::kEmptyCandidate;
  EXPECT_EQ(scored_record_from_json(to_json(r)), r);
  r.scores.perplexity = std::numeric_limits<double>::infinity();
  EXPECT_EQ(scored_record_from_json(to_json(r)), r);
}
