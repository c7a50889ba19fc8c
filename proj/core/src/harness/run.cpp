#include <algorithm>
#include <future>
#include <set>

#include <fmt/format.h>

#include "storyend/common/jsonl.hpp"
#include "storyend/harness/run.hpp"

namespace storyend::harness {

namespace fs = std::filesystem;

namespace {

using Key = std::pair<std::string, std::string>;  // (story_id, backend_id)

struct Outcome {
  std::string ending;
  std::string error;
  int attempts = 1;
};

Outcome attempt(backends::EndingBackend& backend, const backends::GenerationRequest& request) {
  Outcome out;
  try {
    out.ending = backend.generate(request);
    if (out.ending.empty()) out.error = "backend returned an empty ending";
  } catch (const http::RemoteError& e) {
    out.error = e.what();
    out.attempts = e.attempts();
  } catch (const ConfigError&) {
    throw;
  } catch (const IoError&) {
    throw;
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

}  // namespace

GenerationSummary run_generation(const fs::path& run_dir, const GenerationOptions& options) {
  const auto run = open_run(run_dir);
  const auto& config = run.manifest.config;
  const RunPaths paths{run_dir};
  std::unique_ptr<Clock> own_clock;
  const Clock* clock = options.clock;
  if (clock == nullptr) {
    own_clock = make_clock(config.clock);
    clock = own_clock.get();
  }

  GenerationSummary summary;
  const auto existing = read_generation_records(paths.generations(), /*repair=*/true);
  summary.repaired_tail = existing.had_partial_tail;
  std::set<Key> done;
  for (const auto& r : existing.records) done.emplace(r.story_id, r.backend_id);
  summary.existing = existing.records.size();

  JsonlAppender records_out(paths.generations());
  JsonlAppender failures_out(paths.failures());

  std::shared_ptr<http::ExchangeArchive> archive;
  const bool any_remote = std::any_of(config.backends.begin(), config.backends.end(), [](const auto& b) {
    return b.kind == backends::BackendKind::kRemoteChat;
  });
  if (any_remote) archive = std::make_shared<http::ExchangeArchive>(paths.exchanges());
  const backends::BackendResources resources{&run.corpus, &run.split.train, options.transport, archive,
                                             options.sleeper};

  const std::size_t budget = options.max_new_records;
  std::size_t attempted = 0;
  const auto budget_left = [&] { return budget == 0 ? SIZE_MAX : budget - attempted; };

  for (const auto& bc : config.backends) {
    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < run.evaluated.size(); ++i) {
      if (!done.contains({run.evaluated[i]->id, bc.backend_id})) pending.push_back(i);
    }
    if (pending.empty()) continue;
    if (budget_left() == 0) {
      summary.remaining += pending.size();
      continue;
    }

    auto backend = backends::make_backend(bc, resources);
    const auto tmpl = bc.prompt_template();
    const std::size_t window = std::max<std::size_t>(
        1, bc.kind == backends::BackendKind::kRemoteChat ? backend->max_in_flight() : options.local_workers);

    std::size_t next = 0;
    while (next < pending.size() && budget_left() > 0) {
      const std::size_t take = std::min({window, pending.size() - next, budget_left()});
      std::vector<backends::GenerationRequest> requests;
      requests.reserve(take);
      for (std::size_t k = 0; k < take; ++k) {
        const std::size_t i = pending[next + k];
        const auto& story = *run.evaluated[i];
        auto body = corpus::segment_story(story).body;
        auto prompt = backends::render_prompt(tmpl, body);
        requests.push_back(backends::GenerationRequest{story, i, std::move(body), std::move(prompt)});
      }

      std::vector<Outcome> outcomes(take);
      if (take == 1) {
        outcomes[0] = attempt(*backend, requests[0]);
      } else {
        std::vector<std::future<Outcome>> futures;
        futures.reserve(take);
        for (std::size_t k = 0; k < take; ++k) {
          futures.push_back(std::async(std::launch::async, [&, k] { return attempt(*backend, requests[k]); }));
        }
        for (std::size_t k = 0; k < take; ++k) outcomes[k] = futures[k].get();
      }

      // appended in story order regardless of completion order
      for (std::size_t k = 0; k < take; ++k) {
        const auto& req = requests[k];
        if (outcomes[k].error.empty()) {
          records_out.append(backends::to_json(backends::GenerationRecord{
              req.story.id, bc.backend_id, req.prompt, outcomes[k].ending, timestamp_now(*clock)}));
          ++summary.generated;
        } else {
          failures_out.append(to_json(GenerationFailure{req.story.id, bc.backend_id, outcomes[k].error,
                                                        outcomes[k].attempts, timestamp_now(*clock)}));
          ++summary.failed;
          ++summary.remaining;
        }
      }
      attempted += take;
      next += take;
    }
    summary.remaining += pending.size() - next;
  }

  if (summary.remaining == 0 && run.manifest.finished_at.empty()) {
    auto manifest = run.manifest;
    manifest.finished_at = timestamp_now(*clock);
    save_manifest(run_dir, manifest);
  }
  return summary;
}

std::unique_ptr<ngram::SequenceScorer> make_scorer(const ScorerConfig& config, const corpus::Corpus& train,
                                                   const metrics::TokenizerConfig& tokenizer) {
  if (config.kind == "uniform") return std::make_unique<ngram::UniformScorer>(config.uniform_vocabulary, tokenizer);
  if (config.kind != "word_lm") throw ConfigError(fmt::format("unknown scorer '{}'", config.kind));
  std::vector<std::string> texts;
  texts.reserve(train.size());
  for (const auto& story : train) texts.push_back(corpus::full_text(story));
  return std::make_unique<ngram::WordNgramLm>(ngram::WordNgramLm::fit(texts, config.order, config.alpha, tokenizer));
}

std::unique_ptr<embeddings::EmbeddingProvider> make_embedder(const EmbedderConfig& config,
                                                             std::shared_ptr<http::Transport> transport,
                                                             std::shared_ptr<http::ExchangeArchive> archive,
                                                             http::Sleeper sleeper) {
  if (config.kind == "onehot") return std::make_unique<embeddings::OneHotEmbedder>();
  if (config.kind != "remote") throw ConfigError(fmt::format("unknown embedding provider '{}'", config.kind));
  if (!transport) transport = http::make_default_transport();
  return std::make_unique<embeddings::RemoteEmbeddingProvider>(config.remote, std::move(transport),
                                                               std::move(archive), std::move(sleeper));
}

EvaluationResult evaluate_records(std::span<const backends::GenerationRecord> records, const corpus::Corpus& corpus,
                                  const metrics::MetricConfig& config, embeddings::EmbeddingProvider& provider,
                                  const ngram::SequenceScorer& scorer) {
  EvaluationResult result;
  result.scored.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const auto* story = corpus.find(r.story_id);
    if (story == nullptr) {
      result.skipped.push_back(fmt::format("record {} (backend '{}'): story '{}' is not in the corpus", i + 1,
                                           r.backend_id, r.story_id));
      continue;
    }
    const auto gold = corpus::segment_story(*story).ending;
    result.scored.push_back(
        ScoredRecord{r.story_id, r.backend_id, metrics::score_pair(r.ending, gold, config, provider, scorer)});
  }
  return result;
}

EvaluationResult run_evaluation(const fs::path& run_dir, const EvaluationOptions& options) {
  const auto run = open_run(run_dir);
  const auto& config = run.manifest.config;
  const RunPaths paths{run_dir};
  const auto records = read_generation_records(paths.generations());

  auto scorer = options.scorer;
  if (!scorer) scorer = make_scorer(config.scorer, run.split.train, config.metrics.tokenizer);
  auto provider = options.provider;
  if (!provider) {
    std::shared_ptr<http::ExchangeArchive> archive;
    if (config.embedder.kind == "remote") archive = std::make_shared<http::ExchangeArchive>(paths.exchanges());
    provider = make_embedder(config.embedder, options.transport, archive, options.sleeper);
  }

  auto result = evaluate_records(records.records, run.corpus, config.metrics, *provider, *scorer);

  std::string lines;
  for (const auto& s : result.scored) {
    lines += to_json(s).dump();
    lines += '\n';
  }
  write_file_atomic(paths.scores(), lines);
  const nlohmann::json summary{
      {"records", records.records.size()},
      {"scored", result.scored.size()},
      {"skipped", result.skipped},
      {"embedder", provider->name()},
      {"scorer", config.scorer.kind},
  };
  write_file_atomic(paths.evaluation(), summary.dump(2) + "\n");
  return result;
}

}  // namespace storyend::harness
