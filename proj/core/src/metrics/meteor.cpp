#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "storyend/metrics/metrics.hpp"
#include "storyend/metrics/stemmer.hpp"

namespace storyend::metrics {

namespace {

constexpr int kUnaligned = -1;

// Branch-and-bound over one matching stage. Positions already aligned by an
// earlier stage are fixed; every other candidate position may pair with an
// unused reference position of equal key. The stage keeps the maximum number
// of new matches (per key, min of free candidate and free reference counts)
// and minimizes the chunk count of the combined alignment. The search visits
// continuation pairs first, so the first leaf is already a good alignment; a
// node budget bounds pathological inputs with many repeated tokens.
class StageSearch {
 public:
  StageSearch(const std::vector<int>& cand_keys, const std::vector<int>& ref_keys, std::vector<int> fixed,
              std::vector<bool> ref_used)
      : cand_keys_(cand_keys), ref_keys_(ref_keys), align_(std::move(fixed)), ref_used_(std::move(ref_used)) {
    int max_key = -1;
    for (int k : cand_keys_) max_key = std::max(max_key, k);
    for (int k : ref_keys_) max_key = std::max(max_key, k);
    const auto keys = static_cast<std::size_t>(max_key + 1);
    cand_remaining_.assign(keys, 0);
    ref_free_.assign(keys, 0);
    for (std::size_t i = 0; i < cand_keys_.size(); ++i) {
      if (align_[i] == kUnaligned && cand_keys_[i] >= 0) ++cand_remaining_[static_cast<std::size_t>(cand_keys_[i])];
    }
    for (std::size_t j = 0; j < ref_keys_.size(); ++j) {
      if (!ref_used_[j] && ref_keys_[j] >= 0) ++ref_free_[static_cast<std::size_t>(ref_keys_[j])];
    }
    refs_by_key_.resize(keys);
    for (std::size_t j = 0; j < ref_keys_.size(); ++j) {
      if (ref_keys_[j] >= 0) refs_by_key_[static_cast<std::size_t>(ref_keys_[j])].push_back(static_cast<int>(j));
    }
  }

  std::vector<int> run() {
    best_ = align_;
    dfs(0, 0, false, -2);
    return best_;
  }

 private:
  void dfs(std::size_t i, std::size_t chunks, bool prev_aligned, int prev_ref) {
    if (chunks >= best_chunks_) return;
    if (i == cand_keys_.size()) {
      best_chunks_ = chunks;
      best_ = align_;
      return;
    }
    if (++nodes_ > kNodeBudget && best_chunks_ != kNone) return;

    if (align_[i] != kUnaligned) {
      const int j = align_[i];
      const bool extends = prev_aligned && j == prev_ref + 1;
      dfs(i + 1, chunks + (extends ? 0 : 1), true, j);
      return;
    }
    const int key = cand_keys_[i];
    if (key < 0) {
      dfs(i + 1, chunks, false, -2);
      return;
    }
    const auto k = static_cast<std::size_t>(key);
    --cand_remaining_[k];
    if (ref_free_[k] > 0) {
      // Continuation first, then the remaining positions in ascending order.
      const int preferred = prev_aligned ? prev_ref + 1 : -1;
      auto try_ref = [&](int j) {
        const auto uj = static_cast<std::size_t>(j);
        ref_used_[uj] = true;
        --ref_free_[k];
        align_[i] = j;
        const bool extends = prev_aligned && j == prev_ref + 1;
        dfs(i + 1, chunks + (extends ? 0 : 1), true, j);
        align_[i] = kUnaligned;
        ++ref_free_[k];
        ref_used_[uj] = false;
      };
      const auto& candidates = refs_by_key_[k];
      if (preferred >= 0 && std::find(candidates.begin(), candidates.end(), preferred) != candidates.end() &&
          !ref_used_[static_cast<std::size_t>(preferred)]) {
        try_ref(preferred);
      }
      for (int j : candidates) {
        if (j != preferred && !ref_used_[static_cast<std::size_t>(j)]) try_ref(j);
      }
    }
    // Leaving i unmatched is only allowed if later candidates of the same key
    // can still absorb every free reference of that key.
    if (cand_remaining_[k] >= ref_free_[k]) dfs(i + 1, chunks, false, -2);
    ++cand_remaining_[k];
  }

  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  static constexpr std::size_t kNodeBudget = 200'000;

  const std::vector<int>& cand_keys_;
  const std::vector<int>& ref_keys_;
  std::vector<int> align_;
  std::vector<bool> ref_used_;
  std::vector<int> cand_remaining_;
  std::vector<int> ref_free_;
  std::vector<std::vector<int>> refs_by_key_;
  std::vector<int> best_;
  std::size_t best_chunks_ = kNone;
  std::size_t nodes_ = 0;
};

// Interns the key of every position that is still free; taken positions get -1.
void intern_keys(std::span<const std::string> tokens, const std::vector<bool>& taken, bool stem,
                 std::unordered_map<std::string, int>& ids, std::vector<int>& out) {
  out.assign(tokens.size(), -1);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (taken[i]) continue;
    const std::string key = stem ? porter_stem(tokens[i]) : tokens[i];
    out[i] = ids.try_emplace(key, static_cast<int>(ids.size())).first->second;
  }
}

std::size_t count_chunks(const std::vector<int>& align) {
  std::size_t chunks = 0;
  bool prev_aligned = false;
  int prev_ref = -2;
  for (int j : align) {
    if (j == kUnaligned) {
      prev_aligned = false;
      continue;
    }
    if (!(prev_aligned && j == prev_ref + 1)) ++chunks;
    prev_aligned = true;
    prev_ref = j;
  }
  return chunks;
}

}  // namespace

MeteorResult meteor(std::span<const std::string> candidate, std::span<const std::string> reference,
                    const MetricConfig& config) {
  MeteorResult result;
  if (candidate.empty()) result.flags |= kEmptyCandidate;
  if (reference.empty()) result.flags |= kEmptyReference;
  if (result.flags != kNoFlags) return result;

  std::vector<int> align(candidate.size(), kUnaligned);
  std::vector<bool> ref_used(reference.size(), false);

  for (bool stem : {false, true}) {
    std::vector<bool> cand_taken(candidate.size());
    for (std::size_t i = 0; i < candidate.size(); ++i) cand_taken[i] = align[i] != kUnaligned;
    std::unordered_map<std::string, int> ids;
    std::vector<int> cand_keys;
    std::vector<int> ref_keys;
    intern_keys(candidate, cand_taken, stem, ids, cand_keys);
    intern_keys(reference, ref_used, stem, ids, ref_keys);
    const auto stage = StageSearch(cand_keys, ref_keys, align, ref_used).run();
    for (std::size_t i = 0; i < stage.size(); ++i) {
      if (align[i] == kUnaligned && stage[i] != kUnaligned) {
        align[i] = stage[i];
        ref_used[static_cast<std::size_t>(stage[i])] = true;
        if (!stem) ++result.exact_matches;
      }
    }
  }

  result.matches = static_cast<std::size_t>(std::count_if(align.begin(), align.end(), [](int j) { return j != kUnaligned; }));
  if (result.matches == 0) return result;
  result.chunks = count_chunks(align);
  const auto m = static_cast<double>(result.matches);
  result.precision = m / static_cast<double>(candidate.size());
  result.recall = m / static_cast<double>(reference.size());
  result.fmean = result.precision * result.recall /
                 (config.meteor_alpha * result.precision + (1.0 - config.meteor_alpha) * result.recall);
  result.penalty = config.meteor_gamma * std::pow(static_cast<double>(result.chunks) / m, config.meteor_beta);
  result.score = result.fmean * (1.0 - result.penalty);
  return result;
}

}  // namespace storyend::metrics
