#include "storyend/corpus/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>

#include "storyend/common/digest.hpp"
#include "storyend/common/jsonl.hpp"
#include "storyend/common/rng.hpp"
#include "storyend/common/utf8.hpp"
#include "storyend/corpus/csv.hpp"

namespace storyend::corpus {

namespace fs = std::filesystem;

namespace {

std::string lower_trimmed(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool is_story_cloze_header(const CsvRow& header) {
  for (const auto& raw : header) {
    const auto name = lower_trimmed(raw);
    if (name == "inputstoryid" || name == "answerrightending" || name.starts_with("randomfifthsentencequiz") ||
        name.starts_with("inputsentence")) {
      return true;
    }
  }
  return false;
}

// Maps each canonical column to its position in the file header.
std::array<std::size_t, kColumns.size()> resolve_header(const CsvRow& header, const std::string& label) {
  if (is_story_cloze_header(header)) {
    throw CorpusError(label +
                      ": this looks like a Story Cloze file (two candidate endings); only the "
                      "ROCStories layout storyid,storytitle,sentence1..sentence5 is accepted");
  }
  std::array<std::size_t, kColumns.size()> positions{};
  positions.fill(header.size());
  std::vector<std::string> unknown;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const auto name = lower_trimmed(header[i]);
    const auto it = std::find(kColumns.begin(), kColumns.end(), name);
    if (it == kColumns.end()) {
      unknown.push_back(header[i]);
      continue;
    }
    auto& slot = positions[static_cast<std::size_t>(it - kColumns.begin())];
    if (slot != header.size()) throw CorpusError(label + ": duplicate header column '" + name + "'");
    slot = i;
  }
  std::vector<std::string_view> missing;
  for (std::size_t c = 0; c < kColumns.size(); ++c) {
    if (positions[c] == header.size()) missing.push_back(kColumns[c]);
  }
  if (!missing.empty() || !unknown.empty()) {
    std::string msg = label + ": bad header;";
    if (!missing.empty()) {
      msg += " missing columns:";
      for (auto m : missing) msg += " " + std::string(m);
      msg += ";";
    }
    if (!unknown.empty()) {
      msg += " unknown columns:";
      for (const auto& u : unknown) msg += " '" + u + "'";
      msg += ";";
    }
    msg += " expected storyid,storytitle,sentence1,sentence2,sentence3,sentence4,sentence5";
    throw CorpusError(msg);
  }
  return positions;
}

bool is_space_like(char32_t cp) {
  switch (cp) {
    case U' ': case U'\t': case U'\n': case U'\v': case U'\f': case U'\r':
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

bool is_dropped(char32_t cp) {
  return cp < 0x20 || cp == 0x7F || (cp >= 0x80 && cp <= 0x9F) || cp == 0x200B || cp == 0xFEFF;
}

char32_t normalize_quote(char32_t cp) {
  switch (cp) {
    case 0x2018: case 0x2019: case 0x201A: case 0x201B: case 0x2032: case 0xFF07:
      return U'\'';
    case 0x201C: case 0x201D: case 0x201E: case 0x201F: case 0x2033: case 0x00AB: case 0x00BB: case 0xFF02:
      return U'"';
    default:
      return cp;
  }
}

}  // namespace

std::optional<std::string> story_violation(const Story& story) {
  if (clean_text(story.id).empty()) return "story id is empty";
  for (std::size_t i = 0; i < story.sentences.size(); ++i) {
    if (clean_text(story.sentences[i]).empty()) return "sentence" + std::to_string(i + 1) + " is empty";
  }
  return std::nullopt;
}

void Corpus::add(Story story) {
  if (auto why = story_violation(story)) throw CorpusError("invalid story '" + story.id + "': " + *why);
  if (index_.contains(story.id)) throw CorpusError("duplicate story id '" + story.id + "'");
  index_.emplace(story.id, stories_.size());
  stories_.push_back(std::move(story));
}

const Story* Corpus::find(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &stories_[it->second];
}

std::string Diagnostic::to_string() const {
  std::string out = severity == Severity::kError ? "error: " : "warning: ";
  out += file;
  if (row != 0) out += ": row " + std::to_string(row);
  if (!column.empty()) out += ", column " + column;
  out += ": " + message;
  return out;
}

void load_rocstories_text(std::string_view content, const std::string& label, LoadResult& into,
                          const LoadOptions& options) {
  const auto rows = parse_csv(content);
  if (rows.empty()) throw CorpusError(label + ": missing header row");
  const auto positions = resolve_header(rows.front(), label);
  const std::size_t width = rows.front().size();

  auto reject = [&](std::size_t row, std::string column, std::string message) {
    Diagnostic d{Severity::kError, label, row, std::move(column), std::move(message)};
    if (options.strict) throw CorpusError(d.to_string());
    into.diagnostics.push_back(std::move(d));
    ++into.rejected_rows;
  };

  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != width) {
      reject(r, "", "expected " + std::to_string(width) + " columns, found " + std::to_string(row.size()));
      continue;
    }
    Story story;
    story.id = clean_text(row[positions[0]]);
    story.title = clean_text(row[positions[1]]);
    std::string bad_column;
    for (std::size_t s = 0; s < kSentencesPerStory; ++s) {
      story.sentences[s] = clean_text(row[positions[2 + s]]);
      if (story.sentences[s].empty() && bad_column.empty()) bad_column = std::string(kColumns[2 + s]);
    }
    if (story.id.empty()) {
      reject(r, "storyid", "empty story id");
      continue;
    }
    if (!bad_column.empty()) {
      reject(r, bad_column, "empty sentence field");
      continue;
    }
    if (into.corpus.contains(story.id)) {
      reject(r, "storyid", "duplicate story id '" + story.id + "'");
      continue;
    }
    into.corpus.add(std::move(story));
  }
  if (rows.size() == 1) {
    into.diagnostics.push_back({Severity::kWarning, label, 0, "", "header present but no data rows"});
  }
}

LoadResult load_rocstories(std::span<const fs::path> paths, const LoadOptions& options) {
  LoadResult result;
  std::string label;
  for (const auto& path : paths) {
    if (!fs::exists(path)) throw CorpusError("corpus file not found: " + path.string());
    const std::string content = read_file(path);
    load_rocstories_text(content, path.string(), result, options);
    if (!label.empty()) label += ";";
    label += path.string();
  }
  result.corpus.set_source_label(label);
  return result;
}

LoadResult load_rocstories(const fs::path& path, const LoadOptions& options) {
  return load_rocstories(std::span<const fs::path>(&path, 1), options);
}

std::string write_corpus(const Corpus& corpus) {
  std::string out;
  CsvRow header(kColumns.begin(), kColumns.end());
  out += csv_line(header);
  for (const auto& story : corpus) {
    CsvRow row{story.id, story.title};
    row.insert(row.end(), story.sentences.begin(), story.sentences.end());
    out += csv_line(row);
  }
  return out;
}

void save_corpus(const Corpus& corpus, const fs::path& path) { write_file_atomic(path, write_corpus(corpus)); }

std::string corpus_fingerprint(const Corpus& corpus) { return sha256_hex(write_corpus(corpus)); }

std::string clean_text(std::string_view raw) {
  const std::u32string cps = utf8::decode(raw);
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char32_t cp : cps) {
    if (is_space_like(cp)) {
      pending_space = !out.empty();
      continue;
    }
    if (is_dropped(cp)) continue;
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    utf8::append(out, normalize_quote(cp));
  }
  return out;
}

SegmentedStory segment_story(const Story& story) {
  SegmentedStory out;
  for (std::size_t i = 0; i + 1 < kSentencesPerStory; ++i) {
    if (i != 0) out.body.push_back(' ');
    out.body += clean_text(story.sentences[i]);
  }
  out.ending = clean_text(story.sentences.back());
  return out;
}

std::string training_text(const SegmentedStory& segmented, std::string_view sep_marker) {
  std::string out = segmented.body;
  out.push_back(' ');
  out += sep_marker;
  out.push_back(' ');
  out += segmented.ending;
  return out;
}

std::string full_text(const Story& story) {
  const auto seg = segment_story(story);
  return seg.body + " " + seg.ending;
}

Fraction Fraction::parse(std::string_view text) {
  auto fail = [&]() -> Fraction {
    throw ConfigError("invalid fraction '" + std::string(text) + "' (expected e.g. 0.8 or 4/5)");
  };
  auto parse_u64 = [&](std::string_view digits) -> std::uint64_t {
    std::uint64_t v = 0;
    if (digits.empty()) fail();
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
    if (ec != std::errc{} || ptr != digits.data() + digits.size()) fail();
    return v;
  };
  Fraction f;
  if (const auto slash = text.find('/'); slash != std::string_view::npos) {
    f.num = parse_u64(text.substr(0, slash));
    f.den = parse_u64(text.substr(slash + 1));
  } else if (const auto dot = text.find('.'); dot != std::string_view::npos) {
    const auto whole = text.substr(0, dot);
    const auto frac = text.substr(dot + 1);
    if (frac.size() > 18 || (whole.empty() && frac.empty())) fail();
    std::uint64_t den = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
    const std::uint64_t w = whole.empty() ? 0 : parse_u64(whole);
    const std::uint64_t p = frac.empty() ? 0 : parse_u64(frac);
    if (w > 1) fail();
    f.num = w * den + p;
    f.den = den;
  } else {
    f.num = parse_u64(text);
    f.den = 1;
  }
  if (f.den == 0) fail();
  const auto g = std::gcd(f.num, f.den);
  if (g > 1) f.num /= g, f.den /= g;
  return f;
}

std::string Fraction::to_string() const { return std::to_string(num) + "/" + std::to_string(den); }

std::size_t Fraction::floor_of(std::size_t n) const {
  const unsigned __int128 product = static_cast<unsigned __int128>(num) * n;
  return static_cast<std::size_t>(product / den);
}

bool Fraction::operator==(const Fraction& o) const noexcept {
  return static_cast<unsigned __int128>(num) * o.den == static_cast<unsigned __int128>(o.num) * den;
}

CorpusSplit split_corpus(const Corpus& corpus, const SplitSpec& spec) {
  if (spec.train_fraction.den == 0 || spec.train_fraction.num > spec.train_fraction.den) {
    throw ConfigError("train fraction must lie in [0, 1], got " + spec.train_fraction.to_string());
  }
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  seeded_shuffle(order, spec.seed);

  const std::size_t n_train = spec.train_fraction.floor_of(corpus.size());
  CorpusSplit split{Corpus(corpus.source_label() + "#train"), Corpus(corpus.source_label() + "#test")};
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? split.train : split.test).add(corpus.stories()[order[i]]);
  }
  return split;
}

std::vector<std::string> fifth_sentence_pool(const Corpus& corpus) {
  std::vector<std::string> pool;
  pool.reserve(corpus.size());
  for (const auto& story : corpus) pool.push_back(clean_text(story.ending()));
  return pool;
}

}  // namespace storyend::corpus
