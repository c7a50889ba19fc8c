#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "storyend/backends/backends.hpp"
#include "storyend/common/http.hpp"
#include "storyend/embeddings/embeddings.hpp"
#include "storyend/harness/config.hpp"
#include "storyend/metrics/metrics.hpp"
#include "storyend/ngram/word_lm.hpp"

namespace storyend::harness {

struct ScoredRecord {
  std::string story_id;
  std::string backend_id;
  metrics::ScoreSet scores;

  bool operator==(const ScoredRecord&) const = default;
};

nlohmann::json to_json(const ScoredRecord& record);
ScoredRecord scored_record_from_json(const nlohmann::json& j);

/// A backend error that survived its retry budget.
struct GenerationFailure {
  std::string story_id;
  std::string backend_id;
  std::string error;
  int attempts = 1;
  std::string at;
};

nlohmann::json to_json(const GenerationFailure& failure);
GenerationFailure generation_failure_from_json(const nlohmann::json& j);

struct RecordFile {
  std::vector<backends::GenerationRecord> records;
  bool had_partial_tail = false;
};

/// Reads generations.jsonl; `repair` truncates a torn final line.
RecordFile read_generation_records(const std::filesystem::path& path, bool repair = false);
std::vector<ScoredRecord> read_scored_records(const std::filesystem::path& path);
std::vector<GenerationFailure> read_failures(const std::filesystem::path& path);

struct GenerationOptions {
  /// Stop after this many new records (0 = no limit). Used to stage interrupted runs.
  std::size_t max_new_records = 0;
  /// Concurrent generate() calls for local backends.
  std::size_t local_workers = 1;
  std::shared_ptr<http::Transport> transport;  // default: cpp-httplib
  http::Sleeper sleeper = http::real_sleeper();
  const Clock* clock = nullptr;  // default: the manifest's clock
};

struct GenerationSummary {
  std::size_t existing = 0;   // records present before this invocation
  std::size_t generated = 0;  // records appended now
  std::size_t failed = 0;     // items that failed now
  std::size_t remaining = 0;  // items still without a record
  bool repaired_tail = false;
  bool complete() const noexcept { return remaining == 0; }
};

/// Generates an ending for every (backend, evaluated story) pair not yet in
/// generations.jsonl, backends in configuration order and stories in split
/// order. Records are appended in that order whatever the concurrency.
GenerationSummary run_generation(const std::filesystem::path& run_dir, const GenerationOptions& options = {});

std::unique_ptr<ngram::SequenceScorer> make_scorer(const ScorerConfig& config, const corpus::Corpus& train,
                                                   const metrics::TokenizerConfig& tokenizer);

std::unique_ptr<embeddings::EmbeddingProvider> make_embedder(const EmbedderConfig& config,
                                                             std::shared_ptr<http::Transport> transport,
                                                             std::shared_ptr<http::ExchangeArchive> archive,
                                                             http::Sleeper sleeper);

struct EvaluationResult {
  std::vector<ScoredRecord> scored;   // input order
  std::vector<std::string> skipped;   // one diagnostic per unresolvable record
};

/// Scores every record against its story's gold ending.
EvaluationResult evaluate_records(std::span<const backends::GenerationRecord> records, const corpus::Corpus& corpus,
                                  const metrics::MetricConfig& config, embeddings::EmbeddingProvider& provider,
                                  const ngram::SequenceScorer& scorer);

struct EvaluationOptions {
  std::shared_ptr<embeddings::EmbeddingProvider> provider;  // default from the manifest
  std::shared_ptr<const ngram::SequenceScorer> scorer;      // default from the manifest
  std::shared_ptr<http::Transport> transport;
  http::Sleeper sleeper = http::real_sleeper();
};

/// Scores generations.jsonl into scores.jsonl (rewritten atomically) and
/// writes evaluation.json with counts and skipped items.
EvaluationResult run_evaluation(const std::filesystem::path& run_dir, const EvaluationOptions& options = {});

}  // namespace storyend::harness
