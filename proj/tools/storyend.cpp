// storyend: command-line front end for corpus preparation, ending
// generation, scoring, human rating and reporting.

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "storyend/corpus/corpus.hpp"
#include "storyend/corpus/synthetic.hpp"
#include "storyend/embeddings/embeddings.hpp"
#include "storyend/harness/config.hpp"
#include "storyend/harness/report.hpp"
#include "storyend/harness/run.hpp"
#include "storyend/humaneval/humaneval.hpp"
#include "storyend/metrics/metrics.hpp"
#include "storyend/ngram/char_model.hpp"
#include "storyend/ngram/word_lm.hpp"

namespace fs = std::filesystem;
using namespace storyend;

namespace {

constexpr int kExitError = 1;
constexpr int kExitIncomplete = 3;

void print_diagnostics(const std::vector<corpus::Diagnostic>& diagnostics) {
  for (const auto& d : diagnostics) fmt::print(stderr, "{}\n", d.to_string());
}

int cmd_ingest(const std::vector<fs::path>& inputs, const fs::path& output, bool strict) {
  auto result = corpus::load_rocstories(std::span<const fs::path>(inputs), corpus::LoadOptions{strict});
  print_diagnostics(result.diagnostics);
  corpus::save_corpus(result.corpus, output);
  fmt::print("ingested {} stories ({} rows rejected) -> {}\nfingerprint {}\n", result.corpus.size(),
             result.rejected_rows, output.string(), corpus::corpus_fingerprint(result.corpus));
  return 0;
}

int cmd_split(const fs::path& input, const std::string& fraction, std::uint64_t seed, const fs::path& train_out,
              const fs::path& test_out) {
  auto loaded = corpus::load_rocstories(input);
  print_diagnostics(loaded.diagnostics);
  const auto split = corpus::split_corpus(loaded.corpus, {corpus::Fraction::parse(fraction), seed});
  corpus::save_corpus(split.train, train_out);
  corpus::save_corpus(split.test, test_out);
  fmt::print("train {} -> {}\ntest {} -> {}\n", split.train.size(), train_out.string(), split.test.size(),
             test_out.string());
  return 0;
}

int cmd_fit_ngram(const fs::path& input, int order, const std::string& texts_kind, const fs::path& output) {
  auto loaded = corpus::load_rocstories(input);
  print_diagnostics(loaded.diagnostics);
  std::vector<std::string> texts;
  texts.reserve(loaded.corpus.size());
  for (const auto& story : loaded.corpus) {
    if (texts_kind == "stories") {
      texts.push_back(corpus::full_text(story));
    } else if (texts_kind == "endings") {
      texts.push_back(corpus::segment_story(story).ending);
    } else {
      texts.push_back(corpus::training_text(corpus::segment_story(story)));
    }
  }
  const auto model = ngram::CharNgramModel::fit(texts, order);
  model.save(output);
  fmt::print("order-{} character model over {} texts, alphabet {} -> {}\n", order, texts.size(),
             model.alphabet().size(), output.string());
  return 0;
}

int cmd_generate(const fs::path& run_dir, const fs::path& config_path, std::size_t limit, std::size_t workers) {
  const harness::RunPaths paths{run_dir};
  if (!config_path.empty()) {
    const auto config = harness::load_run_config(config_path);
    const auto clock = harness::make_clock(config.clock);
    harness::create_or_open_manifest(run_dir, config, *clock);
  } else if (!fs::exists(paths.manifest())) {
    throw ConfigError(fmt::format("{} has no manifest; pass --config to start a run", run_dir.string()));
  }
  harness::GenerationOptions options;
  options.max_new_records = limit;
  options.local_workers = workers;
  const auto s = harness::run_generation(run_dir, options);
  if (s.repaired_tail) fmt::print(stderr, "repaired a torn final line in {}\n", paths.generations().string());
  fmt::print("{} existing, {} generated, {} failed, {} remaining\n", s.existing, s.generated, s.failed, s.remaining);
  return s.failed > 0 ? kExitIncomplete : 0;
}

int cmd_evaluate(const fs::path& run_dir) {
  const auto result = harness::run_evaluation(run_dir);
  for (const auto& d : result.skipped) fmt::print(stderr, "skipped: {}\n", d);
  fmt::print("scored {} records ({} skipped) -> {}\n", result.scored.size(), result.skipped.size(),
             harness::RunPaths{run_dir}.scores().string());
  return 0;
}

int cmd_rate(const fs::path& run_dir, const std::string& judge, std::uint64_t seed, std::size_t quota) {
  const auto run = harness::open_run(run_dir);
  const auto records = harness::read_generation_records(harness::RunPaths{run_dir}.generations()).records;
  const humaneval::RatingStore store(run_dir);
  auto session = humaneval::open_session(store, records, run.corpus, judge, seed, quota);
  const auto clock = harness::make_clock(run.manifest.config.clock);
  humaneval::run_rating_loop(session, store, *clock, std::cin, std::cout);
  return 0;
}

int cmd_report(const fs::path& run_dir, const std::string& format, const fs::path& output, bool with_ratings) {
  const harness::RunPaths paths{run_dir};
  const auto scored = harness::read_scored_records(paths.scores());
  const auto failures = harness::read_failures(paths.failures());
  std::map<std::string, double> human;
  if (with_ratings) {
    const humaneval::RatingStore store(run_dir);
    const auto ratings = store.all_ratings();
    if (!ratings.empty()) {
      const auto records = harness::read_generation_records(paths.generations()).records;
      const auto summary = humaneval::summarize_ratings(ratings, records);
      if (summary.unresolved > 0) {
        fmt::print(stderr, "{} rating(s) match no generation record and were ignored\n", summary.unresolved);
      }
      human = summary.means();
    }
  }
  std::vector<std::string> expected;
  std::optional<harness::EmbedderConfig> embedder;
  if (fs::exists(paths.manifest())) {
    const auto manifest = harness::manifest_from_json(nlohmann::json::parse(read_file(paths.manifest())));
    for (const auto& b : manifest.config.backends) expected.push_back(b.backend_id);
    embedder = manifest.config.embedder;
  }
  auto report = harness::aggregate_report(scored, human, failures, expected);
  if (embedder && embedder->kind == "onehot") {
    report.notes.push_back("BERT was computed with one-hot token vectors, so it measures exact token overlap.");
  } else if (embedder) {
    report.notes.push_back(fmt::format("BERT was computed with context-free per-token vectors from '{}'; values are "
                                       "not comparable to BERTScore with a contextual encoder.",
                                       embedder->remote.model));
  }
  const auto fmt_kind = harness::parse_report_format(format);
  if (output.empty()) {
    std::cout << harness::render_report(report, fmt_kind);
  } else {
    harness::emit_report(report, fmt_kind, output);
  }
  return 0;
}

int cmd_synth(std::size_t stories, std::uint64_t seed, const fs::path& output) {
  const auto corpus = corpus::synthesize_corpus({stories, seed});
  corpus::save_corpus(corpus, output);
  fmt::print("{} synthetic stories -> {}\n", corpus.size(), output.string());
  return 0;
}

int cmd_score(const std::string& candidate, const std::string& reference) {
  const metrics::MetricConfig config;
  embeddings::OneHotEmbedder embedder;
  const auto cand = metrics::tokenize(candidate, config.tokenizer);
  const auto ref = metrics::tokenize(reference, config.tokenizer);
  const auto bleu = metrics::bleu(cand, ref, config.bleu_max_n);
  const auto r1 = metrics::rouge_n(cand, ref, 1);
  const auto rl = metrics::rouge_l(cand, ref);
  const auto met = metrics::meteor(cand, ref, config);
  const auto bert = metrics::bert_score(cand, ref, embedder);
  fmt::print("BLEU     {:.6f} (bp {:.6f}, order {})\n", bleu.score, bleu.brevity_penalty, bleu.effective_order);
  fmt::print("ROUGE-1  P {:.6f} R {:.6f} F {:.6f}\n", r1.precision, r1.recall, r1.f1);
  fmt::print("ROUGE-L  P {:.6f} R {:.6f} F {:.6f}\n", rl.precision, rl.recall, rl.f1);
  fmt::print("METEOR   {:.6f} (matches {}, chunks {})\n", met.score, met.matches, met.chunks);
  fmt::print("BERT     P {:.6f} R {:.6f} F {:.6f} (one-hot embeddings)\n", bert.precision, bert.recall, bert.f1);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"storyend: story-ending generation and evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "storyend 0.1.0");

  std::vector<fs::path> ingest_inputs;
  fs::path ingest_out;
  bool ingest_strict = false;
  auto* ingest = app.add_subcommand("ingest", "Load ROCStories CSV files into one canonical corpus file");
  ingest->add_option("inputs", ingest_inputs, "Input CSV files")->required()->check(CLI::ExistingFile);
  ingest->add_option("-o,--output", ingest_out, "Canonical corpus CSV")->required();
  ingest->add_flag("--strict", ingest_strict, "Fail on the first malformed row");

  fs::path split_in, split_train, split_test;
  std::string split_fraction = "4/5";
  std::uint64_t split_seed = 0;
  auto* split = app.add_subcommand("split", "Seeded train/test split of a corpus");
  split->add_option("corpus", split_in, "Corpus CSV")->required()->check(CLI::ExistingFile);
  split->add_option("--fraction", split_fraction, "Train fraction, e.g. 0.8 or 4/5")->capture_default_str();
  split->add_option("--seed", split_seed, "Shuffle seed")->capture_default_str();
  split->add_option("--train-out", split_train, "Train split CSV")->required();
  split->add_option("--test-out", split_test, "Test split CSV")->required();

  fs::path fit_in, fit_out;
  int fit_order = 10;
  std::string fit_texts = "stories";
  auto* fit = app.add_subcommand("fit-ngram", "Fit a character n-gram model and save it");
  fit->add_option("corpus", fit_in, "Corpus CSV")->required()->check(CLI::ExistingFile);
  fit->add_option("--order", fit_order, "Model order (conditions on order-1 characters)")->capture_default_str();
  fit->add_option("--texts", fit_texts, "Training texts")
      ->check(CLI::IsMember({"stories", "endings", "training"}))
      ->capture_default_str();
  fit->add_option("-o,--output", fit_out, "Model file")->required();

  fs::path gen_dir, gen_config;
  std::size_t gen_limit = 0;
  std::size_t gen_workers = 1;
  auto* generate = app.add_subcommand("generate", "Generate endings for a run (resumes where it stopped)");
  generate->add_option("--run-dir", gen_dir, "Run directory")->required();
  generate->add_option("--config", gen_config, "Run configuration (INI); required for a new run")
      ->check(CLI::ExistingFile);
  generate->add_option("--limit", gen_limit, "Stop after this many items (0 = all)")->capture_default_str();
  generate->add_option("--workers", gen_workers, "Concurrent items for local backends")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  fs::path eval_dir;
  auto* evaluate = app.add_subcommand("evaluate", "Score a run's generations against the gold endings");
  evaluate->add_option("--run-dir", eval_dir, "Run directory")->required()->check(CLI::ExistingDirectory);

  fs::path rate_dir;
  std::string rate_judge;
  std::uint64_t rate_seed = 0;
  std::size_t rate_quota = humaneval::kDefaultQuota;
  auto* rate = app.add_subcommand("rate", "Blinded interactive rating session");
  rate->add_option("--run-dir", rate_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
  rate->add_option("--judge", rate_judge, "Judge id")->required();
  rate->add_option("--seed", rate_seed, "Session seed")->capture_default_str();
  rate->add_option("--quota", rate_quota, "Items per session")->check(CLI::PositiveNumber)->capture_default_str();

  fs::path report_dir, report_out;
  std::string report_format = "table";
  bool report_no_ratings = false;
  auto* report = app.add_subcommand("report", "Per-backend metric means");
  report->add_option("--run-dir", report_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
  report->add_option("--format", report_format, "table, delimited or json")
      ->check(CLI::IsMember({"table", "delimited", "csv", "json"}))
      ->capture_default_str();
  report->add_option("-o,--output", report_out, "Write here instead of stdout");
  report->add_flag("--no-ratings", report_no_ratings, "Leave the Human Score row empty");

  std::size_t synth_n = 1000;
  std::uint64_t synth_seed = 0;
  fs::path synth_out;
  auto* synth = app.add_subcommand("synth", "Write a synthetic five-sentence story corpus");
  synth->add_option("-n,--stories", synth_n, "Number of stories")->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--seed", synth_seed, "Generator seed")->capture_default_str();
  synth->add_option("-o,--output", synth_out, "Output CSV")->required();

  std::string score_cand, score_ref;
  auto* score = app.add_subcommand("score", "Score one candidate ending against one reference");
  score->add_option("candidate", score_cand)->required();
  score->add_option("reference", score_ref)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return cmd_ingest(ingest_inputs, ingest_out, ingest_strict);
    if (*split) return cmd_split(split_in, split_fraction, split_seed, split_train, split_test);
    if (*fit) return cmd_fit_ngram(fit_in, fit_order, fit_texts, fit_out);
    if (*generate) return cmd_generate(gen_dir, gen_config, gen_limit, gen_workers);
    if (*evaluate) return cmd_evaluate(eval_dir);
    if (*rate) return cmd_rate(rate_dir, rate_judge, rate_seed, rate_quota);
    if (*report) return cmd_report(report_dir, report_format, report_out, !report_no_ratings);
    if (*synth) return cmd_synth(synth_n, synth_seed, synth_out);
    if (*score) return cmd_score(score_cand, score_ref);
  } catch (const std::exception& e) {
    fmt::print(stderr, "storyend: {}\n", e.what());
    return kExitError;
  }
  return 0;
}
