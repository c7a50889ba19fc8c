#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "storyend/backends/backends.hpp"
#include "storyend/common/clock.hpp"
#include "storyend/corpus/corpus.hpp"
#include "storyend/embeddings/embeddings.hpp"
#include "storyend/metrics/metrics.hpp"
#include "storyend/ngram/word_lm.hpp"

namespace storyend::harness {

/// The manifest no longer matches the data it was created from.
class StaleRunError : public Error {
 public:
  using Error::Error;
};

struct EmbedderConfig {
  std::string kind = "onehot";  // onehot | remote
  embeddings::RemoteEmbeddingConfig remote;
};

struct ScorerConfig {
  std::string kind = "word_lm";  // word_lm | uniform
  int order = 3;
  double alpha = 0.1;
  std::size_t uniform_vocabulary = 0;
};

struct ClockConfig {
  std::string mode = "system";  // system | fixed
  std::string fixed_time = "2024-01-01T00:00:00.000Z";
};

struct RunConfig {
  std::string run_id = "run";
  std::uint64_t seed = 0;
  std::vector<std::filesystem::path> corpus_paths;
  corpus::SplitSpec split;
  std::size_t test_limit = 0;  // evaluate only the first N test stories; 0 = all
  std::vector<backends::BackendConfig> backends;
  metrics::MetricConfig metrics;
  EmbedderConfig embedder;
  ScorerConfig scorer;
  ClockConfig clock;

  void validate() const;
};

/// INI text: [run], [corpus], [split], [metrics], [embeddings], [scorer] and
/// one [backend:ID] section per backend, in run order. Relative corpus paths
/// resolve against `base_dir`. Unknown sections and keys are errors.
RunConfig parse_run_config(const std::string& ini_text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

nlohmann::json to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j);

std::unique_ptr<Clock> make_clock(const ClockConfig& config);

struct RunManifest {
  RunConfig config;
  std::string corpus_fingerprint;
  std::size_t corpus_stories = 0;
  std::string started_at;
  std::string finished_at;  // empty until generation has covered every item

  bool operator==(const RunManifest& other) const;
};

nlohmann::json to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const nlohmann::json& j);

/// Fixed file names inside a run directory.
struct RunPaths {
  std::filesystem::path dir;

  std::filesystem::path manifest() const { return dir / "manifest.json"; }
  std::filesystem::path generations() const { return dir / "generations.jsonl"; }
  std::filesystem::path failures() const { return dir / "failures.jsonl"; }
  std::filesystem::path exchanges() const { return dir / "exchanges.jsonl"; }
  std::filesystem::path scores() const { return dir / "scores.jsonl"; }
  std::filesystem::path evaluation() const { return dir / "evaluation.json"; }
  std::filesystem::path ratings_dir() const { return dir / "ratings"; }
  std::filesystem::path sessions_dir() const { return dir / "sessions"; }
};

/// Corpus, split and evaluated subset of a run, verified against its manifest.
struct LoadedRun {
  RunManifest manifest;
  corpus::Corpus corpus;
  corpus::CorpusSplit split;
  std::vector<const corpus::Story*> evaluated;  // test split prefix honouring test_limit
};

corpus::Corpus load_corpus_files(const std::vector<std::filesystem::path>& paths);

/// Creates manifest.json for a fresh run directory, or checks that an existing
/// one was written for the same configuration (ConfigError otherwise).
RunManifest create_or_open_manifest(const std::filesystem::path& run_dir, const RunConfig& config,
                                    const Clock& clock);

void save_manifest(const std::filesystem::path& run_dir, const RunManifest& manifest);

/// Throws StaleRunError when the corpus no longer hashes to the recorded fingerprint.
LoadedRun open_run(const std::filesystem::path& run_dir);

}  // namespace storyend::harness
