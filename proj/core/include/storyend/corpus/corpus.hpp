#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "storyend/common/error.hpp"

namespace storyend::corpus {

class CorpusError : public Error {
 public:
  using Error::Error;
};

inline constexpr std::size_t kSentencesPerStory = 5;
inline constexpr std::string_view kDefaultSepMarker = "[SEP]";

/// One five-sentence story: sentences 1-4 are the body, sentence 5 the ending.
struct Story {
  std::string id;
  std::string title;
  std::array<std::string, kSentencesPerStory> sentences;

  const std::string& ending() const noexcept { return sentences.back(); }
  bool operator==(const Story&) const = default;
};

/// Describes why `story` breaks the Story invariants, or nullopt when valid.
std::optional<std::string> story_violation(const Story& story);

/// Ordered, id-unique collection of stories in ingestion order.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::string source_label) : source_label_(std::move(source_label)) {}

  /// Throws CorpusError when the story is invalid or its id is already present.
  void add(Story story);

  const std::vector<Story>& stories() const noexcept { return stories_; }
  const Story* find(std::string_view id) const;
  bool contains(std::string_view id) const { return find(id) != nullptr; }
  std::size_t size() const noexcept { return stories_.size(); }
  bool empty() const noexcept { return stories_.empty(); }

  const std::string& source_label() const noexcept { return source_label_; }
  void set_source_label(std::string label) { source_label_ = std::move(label); }

  auto begin() const noexcept { return stories_.begin(); }
  auto end() const noexcept { return stories_.end(); }

 private:
  std::vector<Story> stories_;
  std::unordered_map<std::string, std::size_t> index_;
  std::string source_label_;
};

enum class Severity { kWarning, kError };

struct Diagnostic {
  Severity severity = Severity::kError;
  std::string file;
  std::size_t row = 0;  // 1-based data row; 0 for file-level notes
  std::string column;   // empty when the whole row is affected
  std::string message;

  std::string to_string() const;
};

struct LoadOptions {
  bool strict = false;  // throw on the first rejected row instead of skipping it
};

struct LoadResult {
  Corpus corpus;
  std::vector<Diagnostic> diagnostics;
  std::size_t rejected_rows = 0;
};

/// Column layout of ROCStories files, in canonical order.
inline constexpr std::array<std::string_view, 7> kColumns = {
    "storyid", "storytitle", "sentence1", "sentence2", "sentence3", "sentence4", "sentence5"};

/// Loads one or more ROCStories CSV files and concatenates them. File-level
/// problems (missing file, bad header, Story Cloze layout) throw CorpusError;
/// malformed rows are skipped and reported as diagnostics.
LoadResult load_rocstories(const std::filesystem::path& path, const LoadOptions& options = {});
LoadResult load_rocstories(std::span<const std::filesystem::path> paths, const LoadOptions& options = {});

/// Parses CSV content already in memory; `label` names it in diagnostics.
/// Appends into `into` so that multiple sources share one id namespace.
void load_rocstories_text(std::string_view content, const std::string& label, LoadResult& into,
                          const LoadOptions& options = {});

/// Canonical dump: the ingestion header plus one row per story.
std::string write_corpus(const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

/// SHA-256 over the canonical dump.
std::string corpus_fingerprint(const Corpus& corpus);

/// Quote normalization, control-character removal, whitespace collapsing and
/// trimming. Total and idempotent.
std::string clean_text(std::string_view raw);

struct SegmentedStory {
  std::string body;    // sentences 1-4 joined by single spaces
  std::string ending;  // sentence 5
};

SegmentedStory segment_story(const Story& story);

/// body + " " + sep_marker + " " + ending.
std::string training_text(const SegmentedStory& segmented, std::string_view sep_marker = kDefaultSepMarker);

/// All five sentences joined with single spaces.
std::string full_text(const Story& story);

/// Exact non-negative fraction num/den, den > 0.
struct Fraction {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  /// Accepts "0.8", "4/5", "1", "1.0". Throws ConfigError otherwise.
  static Fraction parse(std::string_view text);
  double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
  std::string to_string() const;
  /// floor(num * n / den) without overflow.
  std::size_t floor_of(std::size_t n) const;
  bool operator==(const Fraction& o) const noexcept;
};

struct SplitSpec {
  Fraction train_fraction{4, 5};
  std::uint64_t seed = 0;
};

struct CorpusSplit {
  Corpus train;
  Corpus test;
};

/// Seeded SplitMix64 Fisher-Yates shuffle, then a prefix of
/// floor(train_fraction * N) stories goes to train. Throws ConfigError when
/// the fraction exceeds 1.
CorpusSplit split_corpus(const Corpus& corpus, const SplitSpec& spec);

/// Cleaned fifth sentences in corpus order, duplicates kept.
std::vector<std::string> fifth_sentence_pool(const Corpus& corpus);

}  // namespace storyend::corpus
