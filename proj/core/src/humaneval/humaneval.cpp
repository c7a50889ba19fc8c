#include "storyend/humaneval/humaneval.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>

#include <fmt/format.h>

#include "storyend/common/digest.hpp"
#include "storyend/common/jsonl.hpp"
#include "storyend/common/rng.hpp"

namespace storyend::humaneval {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kSessionFormat = "storyend-session v1";

void check_judge_id(std::string_view judge) {
  const bool ok = !judge.empty() && std::all_of(judge.begin(), judge.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-' ||
           c == '.';
  }) && judge != "." && judge != "..";
  if (!ok) throw RatingError(fmt::format("judge id '{}' must use only letters, digits, '.', '_' or '-'", judge));
}

std::map<std::string, std::string> backend_by_item(std::span<const backends::GenerationRecord> records) {
  std::map<std::string, std::string> out;
  for (const auto& r : records) out.emplace(item_id_for(r.story_id, r.backend_id), r.backend_id);
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string pretty_dimension(std::string_view dim) {
  std::string s(dim);
  std::replace(s.begin(), s.end(), '_', ' ');
  return s;
}

}  // namespace

std::string item_id_for(std::string_view story_id, std::string_view backend_id) {
  std::string key(story_id);
  key.push_back('\x1f');
  key.append(backend_id);
  return sha256_hex(key).substr(0, 16);
}

std::string display_item(const RatingItem& item, std::size_t position, std::size_t total) {
  return fmt::format("[{}/{}] item {}\nStory:  {}\nEnding: {}\n", position, total, item.item_id, item.body,
                     item.ending);
}

std::string Session::shortfall_notice() const {
  if (!shortfall()) return {};
  return fmt::format("only {} item(s) available for judge '{}', fewer than the quota of {}", items.size(), judge_id,
                     quota);
}

const RatingItem* Session::find(std::string_view item_id) const {
  for (const auto& item : items) {
    if (item.item_id == item_id) return &item;
  }
  return nullptr;
}

Session build_session(std::span<const backends::GenerationRecord> records, const corpus::Corpus& corpus,
                      const std::string& judge_id, std::uint64_t seed, std::size_t quota,
                      const std::set<std::string>& already_rated) {
  check_judge_id(judge_id);
  if (quota == 0) throw RatingError("quota must be at least 1");
  std::vector<RatingItem> pool;
  std::set<std::string> seen;
  for (const auto& r : records) {
    const auto* story = corpus.find(r.story_id);
    if (story == nullptr) continue;
    auto id = item_id_for(r.story_id, r.backend_id);
    if (already_rated.contains(id) || !seen.insert(id).second) continue;
    pool.push_back(RatingItem{std::move(id), corpus::segment_story(*story).body, r.ending, r.backend_id});
  }
  if (pool.empty()) throw RatingError(fmt::format("no unrated generation records available for judge '{}'", judge_id));

  // canonical order first so the draw does not depend on file order
  std::sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) { return a.item_id < b.item_id; });
  seeded_shuffle(pool, seed);

  Session s;
  s.judge_id = judge_id;
  s.seed = seed;
  s.quota = quota;
  s.available = pool.size();
  if (pool.size() > quota) pool.resize(quota);
  s.items = std::move(pool);
  return s;
}

nlohmann::json session_state(const Session& s) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& item : s.items) {
    items.push_back({{"item_id", item.item_id}, {"body", item.body}, {"ending", item.ending}});
  }
  return nlohmann::json{{"format", kSessionFormat},  {"judge_id", s.judge_id},
                        {"seed", s.seed},            {"quota", s.quota},
                        {"available", s.available},  {"items", items},
                        {"completed", s.completed}};
}

Session restore_session(const nlohmann::json& j, std::span<const backends::GenerationRecord> records) {
  if (j.value("format", std::string{}) != kSessionFormat) throw RatingError("not a rating session file");
  const auto backends_of = backend_by_item(records);
  Session s;
  s.judge_id = j.at("judge_id").get<std::string>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.quota = j.at("quota").get<std::size_t>();
  s.available = j.at("available").get<std::size_t>();
  for (const auto& item : j.at("items")) {
    RatingItem r{item.at("item_id").get<std::string>(), item.at("body").get<std::string>(),
                 item.at("ending").get<std::string>(), {}};
    const auto it = backends_of.find(r.item_id);
    if (it == backends_of.end()) {
      throw RatingError(fmt::format("session item {} no longer matches any generation record", r.item_id));
    }
    r.backend_id = it->second;
    s.items.push_back(std::move(r));
  }
  for (const auto& id : j.at("completed")) s.completed.insert(id.get<std::string>());
  return s;
}

nlohmann::json to_json(const RatingRecord& r) {
  nlohmann::json scores = nlohmann::json::object();
  for (std::size_t d = 0; d < kDimensionCount; ++d) scores[std::string(kDimensions[d])] = r.scores[d];
  return nlohmann::json{{"item_id", r.item_id}, {"judge_id", r.judge_id}, {"scores", scores},
                        {"overall", r.overall}, {"rated_at", r.rated_at}, {"revision", r.revision}};
}

RatingRecord rating_record_from_json(const nlohmann::json& j) {
  RatingRecord r;
  r.item_id = j.at("item_id").get<std::string>();
  r.judge_id = j.at("judge_id").get<std::string>();
  for (std::size_t d = 0; d < kDimensionCount; ++d) {
    r.scores[d] = j.at("scores").at(std::string(kDimensions[d])).get<int>();
  }
  validate_scores(r.scores);
  r.overall = j.at("overall").get<double>();
  r.rated_at = j.at("rated_at").get<std::string>();
  r.revision = j.value("revision", 1);
  return r;
}

void validate_scores(const DimensionScores& scores) {
  for (std::size_t d = 0; d < kDimensionCount; ++d) {
    if (scores[d] < kMinScore || scores[d] > kMaxScore) {
      throw RatingError(fmt::format("{} score {} is outside {}..{}", kDimensions[d], scores[d], kMinScore, kMaxScore));
    }
  }
}

double overall_of(const DimensionScores& scores) noexcept {
  int sum = 0;
  for (int s : scores) sum += s;
  return static_cast<double>(sum) / static_cast<double>(kDimensionCount);
}

RatingStore::RatingStore(fs::path root) : root_(std::move(root)) {}

fs::path RatingStore::ratings_file(std::string_view judge_id) const {
  check_judge_id(judge_id);
  return root_ / "ratings" / (std::string(judge_id) + ".jsonl");
}

fs::path RatingStore::session_file(std::string_view judge_id, std::uint64_t seed) const {
  check_judge_id(judge_id);
  return root_ / "sessions" / fmt::format("{}-{}.json", judge_id, seed);
}

std::vector<RatingRecord> RatingStore::judge_ratings(std::string_view judge_id) const {
  std::vector<RatingRecord> out;
  for (const auto& j : read_jsonl(ratings_file(judge_id)).records) out.push_back(rating_record_from_json(j));
  return out;
}

std::vector<RatingRecord> RatingStore::all_ratings() const {
  std::vector<RatingRecord> out;
  const auto dir = root_ / "ratings";
  if (!fs::is_directory(dir)) return out;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    for (const auto& j : read_jsonl(f).records) out.push_back(rating_record_from_json(j));
  }
  return out;
}

void RatingStore::append(const RatingRecord& record) const {
  const auto path = ratings_file(record.judge_id);
  fs::create_directories(path.parent_path());
  JsonlAppender(path).append(to_json(record));
}

void RatingStore::save_session(const Session& session) const {
  const auto path = session_file(session.judge_id, session.seed);
  fs::create_directories(path.parent_path());
  write_file_atomic(path, session_state(session).dump(2) + "\n");
}

std::optional<Session> RatingStore::load_session(std::string_view judge_id, std::uint64_t seed,
                                                 std::span<const backends::GenerationRecord> records) const {
  const auto path = session_file(judge_id, seed);
  if (!fs::exists(path)) return std::nullopt;
  return restore_session(nlohmann::json::parse(read_file(path)), records);
}

Session open_session(const RatingStore& store, std::span<const backends::GenerationRecord> records,
                     const corpus::Corpus& corpus, const std::string& judge_id, std::uint64_t seed,
                     std::size_t quota) {
  if (auto existing = store.load_session(judge_id, seed, records)) return std::move(*existing);
  std::set<std::string> rated;
  for (const auto& r : store.judge_ratings(judge_id)) rated.insert(r.item_id);
  auto session = build_session(records, corpus, judge_id, seed, quota, rated);
  store.save_session(session);
  return session;
}

RatingRecord record_rating(Session& session, const RatingStore& store, std::string_view item_id,
                           const DimensionScores& scores, const Clock& clock) {
  if (session.find(item_id) == nullptr) {
    throw RatingError(fmt::format("item {} is not part of this session", item_id));
  }
  validate_scores(scores);
  int revision = 1;
  for (const auto& r : store.judge_ratings(session.judge_id)) {
    if (r.item_id == item_id) revision = std::max(revision, r.revision + 1);
  }
  RatingRecord record{std::string(item_id), session.judge_id, scores, overall_of(scores), timestamp_now(clock),
                      revision};
  store.append(record);
  session.completed.insert(std::string(item_id));
  store.save_session(session);
  return record;
}

std::vector<RatingRecord> latest_ratings(std::span<const RatingRecord> ratings) {
  std::map<std::pair<std::string, std::string>, const RatingRecord*> latest;
  for (const auto& r : ratings) {
    auto& slot = latest[{r.item_id, r.judge_id}];
    if (slot == nullptr || r.revision >= slot->revision) slot = &r;
  }
  std::vector<RatingRecord> out;
  out.reserve(latest.size());
  for (const auto& [key, r] : latest) out.push_back(*r);
  return out;
}

std::map<std::string, double> HumanSummary::means() const {
  std::map<std::string, double> out;
  for (const auto& [id, b] : backends) out[id] = b.mean;
  return out;
}

HumanSummary summarize_ratings(std::span<const RatingRecord> ratings,
                               std::span<const backends::GenerationRecord> records) {
  const auto backends_of = backend_by_item(records);
  struct Sums {
    double overall = 0;
    std::size_t n = 0;
    std::array<double, kDimensionCount> dims{};
    std::map<std::string, std::pair<double, std::size_t>> judges;
  };
  std::map<std::string, Sums> sums;
  HumanSummary summary;
  for (const auto& r : latest_ratings(ratings)) {
    const auto it = backends_of.find(r.item_id);
    if (it == backends_of.end()) {
      ++summary.unresolved;
      continue;
    }
    auto& s = sums[it->second];
    s.overall += r.overall;
    ++s.n;
    for (std::size_t d = 0; d < kDimensionCount; ++d) s.dims[d] += r.scores[d];
    auto& j = s.judges[r.judge_id];
    j.first += r.overall;
    ++j.second;
  }
  for (const auto& [backend, s] : sums) {
    BackendHumanScore b;
    const double n = static_cast<double>(s.n);
    b.mean = s.overall / n;
    b.ratings = s.n;
    for (std::size_t d = 0; d < kDimensionCount; ++d) b.dimension_means[d] = s.dims[d] / n;
    for (const auto& [judge, js] : s.judges) b.judge_means[judge] = js.first / static_cast<double>(js.second);
    summary.backends.emplace(backend, std::move(b));
  }
  return summary;
}

std::size_t run_rating_loop(Session& session, const RatingStore& store, const Clock& clock, std::istream& in,
                            std::ostream& out) {
  if (session.shortfall()) out << "Notice: " << session.shortfall_notice() << '\n';
  out << fmt::format("{} item(s) in this session, {} already rated. Enter q to stop.\n", session.items.size(),
                     session.completed.size());
  std::size_t rated = 0;
  for (std::size_t i = 0; i < session.items.size(); ++i) {
    const auto& item = session.items[i];
    if (session.completed.contains(item.item_id)) continue;
    out << '\n' << display_item(item, i + 1, session.items.size());
    DimensionScores scores{};
    for (std::size_t d = 0; d < kDimensionCount; ++d) {
      for (;;) {
        out << fmt::format("  {} ({}-{}): ", pretty_dimension(kDimensions[d]), kMinScore, kMaxScore) << std::flush;
        std::string line;
        if (!std::getline(in, line)) {
          out << "\nInput closed; progress saved.\n";
          return rated;
        }
        const auto text = trim(line);
        if (text == "q" || text == "Q") {
          out << "Stopped; progress saved.\n";
          return rated;
        }
        int value = 0;
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (ec == std::errc{} && ptr == text.data() + text.size() && value >= kMinScore && value <= kMaxScore) {
          scores[d] = value;
          break;
        }
        out << fmt::format("  Please enter a whole number from {} to {}.\n", kMinScore, kMaxScore);
      }
    }
    const auto record = record_rating(session, store, item.item_id, scores, clock);
    out << fmt::format("  Saved (overall {:.1f}).\n", record.overall);
    ++rated;
  }
  out << fmt::format("\nSession complete: {} of {} item(s) rated.\n", session.completed.size(), session.items.size());
  return rated;
}

}  // namespace storyend::humaneval
