#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "storyend/backends/backends.hpp"
#include "storyend/common/clock.hpp"
#include "storyend/common/error.hpp"
#include "storyend/corpus/corpus.hpp"

namespace storyend::humaneval {

class RatingError : public Error {
 public:
  using Error::Error;
};

inline constexpr std::size_t kDimensionCount = 5;
inline constexpr std::array<std::string_view, kDimensionCount> kDimensions = {
    "coherence", "narrative_satisfaction", "creativity", "emotional_impact", "grammatical_correctness"};
inline constexpr std::size_t kDefaultQuota = 225;
inline constexpr int kMinScore = 1;
inline constexpr int kMaxScore = 5;

using DimensionScores = std::array<int, kDimensionCount>;

/// Opaque, stable id of a (story, backend) pair; reveals neither.
std::string item_id_for(std::string_view story_id, std::string_view backend_id);

struct RatingItem {
  std::string item_id;
  std::string body;
  std::string ending;
  std::string backend_id;  // hidden from judges; never serialized into session state
};

/// What a judge sees for one item.
std::string display_item(const RatingItem& item, std::size_t position, std::size_t total);

struct Session {
  std::string judge_id;
  std::uint64_t seed = 0;
  std::size_t quota = kDefaultQuota;
  std::size_t available = 0;  // records that could have been drawn
  std::vector<RatingItem> items;
  std::set<std::string> completed;

  bool shortfall() const noexcept { return items.size() < quota; }
  std::string shortfall_notice() const;
  const RatingItem* find(std::string_view item_id) const;
  std::size_t pending() const noexcept { return items.size() - completed.size(); }
};

/// Draws up to `quota` items from records whose story resolves in the corpus
/// and which the judge has not rated yet (`already_rated`), in seeded random
/// order. Throws RatingError when nothing is available.
Session build_session(std::span<const backends::GenerationRecord> records, const corpus::Corpus& corpus,
                      const std::string& judge_id, std::uint64_t seed, std::size_t quota = kDefaultQuota,
                      const std::set<std::string>& already_rated = {});

/// Session state without backend ids: item order, text and completed set.
nlohmann::json session_state(const Session& session);
/// Restores a session, re-attaching backend ids from the records.
Session restore_session(const nlohmann::json& state, std::span<const backends::GenerationRecord> records);

struct RatingRecord {
  std::string item_id;
  std::string judge_id;
  DimensionScores scores{};
  double overall = 0.0;
  std::string rated_at;
  int revision = 1;  // >1 when this supersedes an earlier rating of the same item by the same judge

  bool operator==(const RatingRecord&) const = default;
};

nlohmann::json to_json(const RatingRecord& record);
RatingRecord rating_record_from_json(const nlohmann::json& j);

/// Throws RatingError unless every score is an integer in 1..5.
void validate_scores(const DimensionScores& scores);
double overall_of(const DimensionScores& scores) noexcept;

/// ratings/<judge>.jsonl and sessions/<judge>-<seed>.json under a root directory.
class RatingStore {
 public:
  explicit RatingStore(std::filesystem::path root);

  std::filesystem::path ratings_file(std::string_view judge_id) const;
  std::filesystem::path session_file(std::string_view judge_id, std::uint64_t seed) const;

  /// Every line of every judge file, audit history included.
  std::vector<RatingRecord> all_ratings() const;
  std::vector<RatingRecord> judge_ratings(std::string_view judge_id) const;

  void append(const RatingRecord& record) const;
  void save_session(const Session& session) const;
  std::optional<Session> load_session(std::string_view judge_id, std::uint64_t seed,
                                      std::span<const backends::GenerationRecord> records) const;

 private:
  std::filesystem::path root_;
};

/// Opens the saved session for (judge, seed) or builds and saves a new one.
Session open_session(const RatingStore& store, std::span<const backends::GenerationRecord> records,
                     const corpus::Corpus& corpus, const std::string& judge_id, std::uint64_t seed,
                     std::size_t quota = kDefaultQuota);

/// Validates, appends to the judge's store, marks the item done and saves the
/// session. Re-rating an item appends a new revision; the old line stays.
RatingRecord record_rating(Session& session, const RatingStore& store, std::string_view item_id,
                           const DimensionScores& scores, const Clock& clock);

/// Latest revision per (item, judge).
std::vector<RatingRecord> latest_ratings(std::span<const RatingRecord> ratings);

struct BackendHumanScore {
  double mean = 0.0;  // mean overall across all judges' ratings
  std::size_t ratings = 0;
  std::array<double, kDimensionCount> dimension_means{};
  std::map<std::string, double> judge_means;
};

struct HumanSummary {
  std::map<std::string, BackendHumanScore> backends;  // backends without ratings are absent
  std::size_t unresolved = 0;                         // ratings whose item matches no record

  std::map<std::string, double> means() const;
};

HumanSummary summarize_ratings(std::span<const RatingRecord> ratings,
                               std::span<const backends::GenerationRecord> records);

/// Terminal loop: shows each pending item and reads five scores. Invalid
/// input is re-prompted; "q" saves and stops. Returns the number rated.
std::size_t run_rating_loop(Session& session, const RatingStore& store, const Clock& clock, std::istream& in,
                            std::ostream& out);

}  // namespace storyend::humaneval
