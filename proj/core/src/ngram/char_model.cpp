#include "storyend/ngram/char_model.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>

#include "storyend/common/jsonl.hpp"
#include "storyend/common/rng.hpp"
#include "storyend/common/utf8.hpp"

namespace storyend::ngram {

namespace {

constexpr std::string_view kMagic = "storyend-char-ngram";
constexpr int kFormatVersion = 1;

std::string context_to_hex(std::string_view key) {
  if (key.empty()) return "-";
  std::string out;
  for (char32_t cp : utf8::decode(key)) {
    if (!out.empty()) out.push_back('.');
    out += fmt::format("{:x}", static_cast<std::uint32_t>(cp));
  }
  return out;
}

char32_t parse_code_point(std::string_view hex) {
  std::uint32_t v = 0;
  const auto [ptr, ec] = std::from_chars(hex.data(), hex.data() + hex.size(), v, 16);
  if (ec != std::errc{} || ptr != hex.data() + hex.size() || hex.empty() || v > 0x10FFFF) {
    throw ModelFormatError("bad code point '" + std::string(hex) + "'");
  }
  return static_cast<char32_t>(v);
}

std::string context_from_hex(std::string_view hex) {
  if (hex == "-") return {};
  std::string out;
  while (!hex.empty()) {
    const auto dot = hex.find('.');
    utf8::append(out, parse_code_point(hex.substr(0, dot)));
    if (dot == std::string_view::npos) break;
    hex.remove_prefix(dot + 1);
  }
  return out;
}

template <typename T>
T parse_number(std::string_view text, const char* what) {
  T v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    throw ModelFormatError(fmt::format("bad {} '{}'", what, text));
  }
  return v;
}

class TokenReader {
 public:
  explicit TokenReader(std::string_view text) : text_(text) {}

  std::string_view next(const char* what) {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\n')) ++pos_;
    if (pos_ >= text_.size()) throw ModelFormatError(fmt::format("unexpected end of model file, wanted {}", what));
    const std::size_t start = pos_;
    while (pos_ < text_.size() && text_[pos_] != ' ' && text_[pos_] != '\n') ++pos_;
    return text_.substr(start, pos_ - start);
  }

  void expect(std::string_view literal) {
    const auto got = next(std::string(literal).c_str());
    if (got != literal) throw ModelFormatError(fmt::format("expected '{}', found '{}'", literal, got));
  }

  bool at_end() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\n')) ++pos_;
    return pos_ >= text_.size();
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

double CharDistribution::probability(char32_t cp) const noexcept {
  const auto it = std::lower_bound(probs.begin(), probs.end(), cp,
                                   [](const auto& entry, char32_t c) { return entry.first < c; });
  return (it != probs.end() && it->first == cp) ? it->second : 0.0;
}

CharNgramModel CharNgramModel::fit(std::span<const std::string> texts, int order) {
  if (order < 2) throw ConfigError(fmt::format("character model order must be >= 2, got {}", order));

  const auto levels = static_cast<std::size_t>(order);
  // Most contexts have one or two successors; a flat vector beats a map here.
  using Successors = std::vector<std::pair<char32_t, std::uint64_t>>;
  std::vector<std::unordered_map<std::string, Successors>> raw(levels);
  std::set<char32_t> alphabet;
  bool any = false;

  std::vector<std::size_t> offsets;
  for (const auto& text : texts) {
    const std::u32string cps = utf8::decode(text);
    if (cps.empty()) continue;
    any = true;
    std::string encoded;
    offsets.clear();
    for (char32_t cp : cps) {
      offsets.push_back(encoded.size());
      utf8::append(encoded, cp);
    }
    for (std::size_t i = 0; i < cps.size(); ++i) {
      alphabet.insert(cps[i]);
      const std::size_t max_len = std::min(i, levels - 1);
      for (std::size_t len = 0; len <= max_len; ++len) {
        const std::size_t from = offsets[i - len];
        auto& successors = raw[len][encoded.substr(from, offsets[i] - from)];
        const auto it = std::find_if(successors.begin(), successors.end(),
                                     [&](const auto& entry) { return entry.first == cps[i]; });
        if (it == successors.end()) {
          successors.emplace_back(cps[i], 1);
        } else {
          ++it->second;
        }
      }
    }
  }
  if (!any) throw ConfigError("character model needs at least one non-empty training text");

  CharNgramModel model;
  model.order_ = order;
  model.alphabet_.assign(alphabet.begin(), alphabet.end());
  model.levels_.resize(levels);
  for (std::size_t len = 0; len < levels; ++len) {
    auto& src = raw[len];
    std::vector<std::string> keys;
    keys.reserve(src.size());
    for (const auto& [key, _] : src) keys.push_back(key);
    std::sort(keys.begin(), keys.end());
    Level& level = model.levels_[len];
    level.contexts.reserve(keys.size());
    for (auto& key : keys) {
      auto& successors = src.at(key);
      std::sort(successors.begin(), successors.end());
      Context ctx;
      ctx.first = static_cast<std::uint32_t>(level.successors.size());
      ctx.count = static_cast<std::uint32_t>(successors.size());
      for (const auto& [cp, n] : successors) {
        level.successors.emplace_back(cp, n);
        ctx.total += n;
      }
      ctx.key = std::move(key);
      level.contexts.push_back(std::move(ctx));
    }
    src.clear();
  }
  return model;
}

std::size_t CharNgramModel::context_count(std::size_t length) const {
  return length < levels_.size() ? levels_[length].contexts.size() : 0;
}

const CharNgramModel::Context* CharNgramModel::find(const Level& level, std::string_view key) const {
  const auto it = std::lower_bound(level.contexts.begin(), level.contexts.end(), key,
                                   [](const Context& c, std::string_view k) { return c.key < k; });
  return (it != level.contexts.end() && it->key == key) ? &*it : nullptr;
}

CharDistribution CharNgramModel::distribution_of(const Level& level, const Context& ctx,
                                                 std::size_t length) const {
  CharDistribution dist;
  dist.context_length = length;
  dist.probs.reserve(ctx.count);
  const double total = static_cast<double>(ctx.total);
  for (std::uint32_t i = 0; i < ctx.count; ++i) {
    const auto& [cp, n] = level.successors[ctx.first + i];
    dist.probs.emplace_back(cp, static_cast<double>(n) / total);
  }
  return dist;
}

CharDistribution CharNgramModel::next_char_distribution(std::u32string_view context) const {
  const std::size_t longest = std::min(context.size(), levels_.empty() ? 0 : levels_.size() - 1);
  for (std::size_t len = longest + 1; len-- > 0;) {
    const std::string key = utf8::encode(context.substr(context.size() - len));
    if (const Context* ctx = find(levels_[len], key)) return distribution_of(levels_[len], *ctx, len);
  }
  CharDistribution dist;
  dist.uniform_fallback = true;
  const double p = alphabet_.empty() ? 0.0 : 1.0 / static_cast<double>(alphabet_.size());
  for (char32_t cp : alphabet_) dist.probs.emplace_back(cp, p);
  return dist;
}

CharDistribution CharNgramModel::next_char_distribution(std::string_view context_utf8) const {
  return next_char_distribution(utf8::decode(context_utf8));
}

std::string CharNgramModel::generate_sentence(std::uint64_t seed, std::string_view prime,
                                              std::size_t max_chars) const {
  SplitMix64 rng(seed);
  std::u32string history = utf8::decode(prime);
  std::string out;
  const std::size_t window = static_cast<std::size_t>(std::max(order_ - 1, 0));
  for (std::size_t produced = 0; produced < max_chars; ++produced) {
    const std::size_t from = history.size() > window ? history.size() - window : 0;
    const auto dist = next_char_distribution(std::u32string_view(history).substr(from));
    if (dist.probs.empty()) break;
    const double u = rng.uniform01();
    double cumulative = 0.0;
    char32_t pick = dist.probs.back().first;
    for (const auto& [cp, p] : dist.probs) {
      cumulative += p;
      if (u < cumulative) {
        pick = cp;
        break;
      }
    }
    history.push_back(pick);
    utf8::append(out, pick);
    if (is_sentence_terminator(pick)) break;
  }
  return out;
}

std::string CharNgramModel::serialize() const {
  std::string out = fmt::format("{} v{}\norder {}\nalphabet {}", kMagic, kFormatVersion, order_, alphabet_.size());
  for (char32_t cp : alphabet_) out += fmt::format(" {:x}", static_cast<std::uint32_t>(cp));
  out.push_back('\n');
  for (std::size_t len = 0; len < levels_.size(); ++len) {
    const Level& level = levels_[len];
    out += fmt::format("level {} {}\n", len, level.contexts.size());
    for (const Context& ctx : level.contexts) {
      out += fmt::format("{} {} {}", context_to_hex(ctx.key), ctx.total, ctx.count);
      for (std::uint32_t i = 0; i < ctx.count; ++i) {
        const auto& [cp, n] = level.successors[ctx.first + i];
        out += fmt::format(" {:x}:{}", static_cast<std::uint32_t>(cp), n);
      }
      out.push_back('\n');
    }
  }
  out += "end\n";
  return out;
}

CharNgramModel CharNgramModel::deserialize(std::string_view text) {
  TokenReader in(text);
  in.expect(kMagic);
  in.expect(fmt::format("v{}", kFormatVersion));
  in.expect("order");
  CharNgramModel model;
  model.order_ = parse_number<int>(in.next("order"), "order");
  if (model.order_ < 2) throw ModelFormatError("order must be >= 2");
  in.expect("alphabet");
  const auto alphabet_size = parse_number<std::size_t>(in.next("alphabet size"), "alphabet size");
  for (std::size_t i = 0; i < alphabet_size; ++i) {
    model.alphabet_.push_back(parse_code_point(in.next("alphabet entry")));
    if (i > 0 && model.alphabet_[i - 1] >= model.alphabet_[i]) throw ModelFormatError("alphabet not ascending");
  }
  model.levels_.resize(static_cast<std::size_t>(model.order_));
  for (std::size_t len = 0; len < model.levels_.size(); ++len) {
    in.expect("level");
    if (parse_number<std::size_t>(in.next("level index"), "level index") != len) {
      throw ModelFormatError("levels out of order");
    }
    const auto n_contexts = parse_number<std::size_t>(in.next("context count"), "context count");
    Level& level = model.levels_[len];
    level.contexts.reserve(n_contexts);
    for (std::size_t c = 0; c < n_contexts; ++c) {
      Context ctx;
      ctx.key = context_from_hex(in.next("context"));
      if (utf8::decode(ctx.key).size() != len) throw ModelFormatError("context length does not match level");
      if (!level.contexts.empty() && level.contexts.back().key >= ctx.key) {
        throw ModelFormatError("contexts not ascending");
      }
      ctx.total = parse_number<std::uint64_t>(in.next("total"), "total");
      ctx.count = parse_number<std::uint32_t>(in.next("successor count"), "successor count");
      ctx.first = static_cast<std::uint32_t>(level.successors.size());
      std::uint64_t sum = 0;
      for (std::uint32_t i = 0; i < ctx.count; ++i) {
        const auto entry = in.next("successor");
        const auto colon = entry.find(':');
        if (colon == std::string_view::npos) throw ModelFormatError("bad successor '" + std::string(entry) + "'");
        const char32_t cp = parse_code_point(entry.substr(0, colon));
        const auto n = parse_number<std::uint64_t>(entry.substr(colon + 1), "count");
        if (n == 0) throw ModelFormatError("zero successor count");
        if (i > 0 && level.successors.back().first >= cp) throw ModelFormatError("successors not ascending");
        if (!std::binary_search(model.alphabet_.begin(), model.alphabet_.end(), cp)) {
          throw ModelFormatError("successor outside alphabet");
        }
        level.successors.emplace_back(cp, n);
        sum += n;
      }
      if (sum != ctx.total || ctx.count == 0) throw ModelFormatError("context total does not match its counts");
      level.contexts.push_back(std::move(ctx));
    }
  }
  in.expect("end");
  if (!in.at_end()) throw ModelFormatError("trailing data after 'end'");
  return model;
}

void CharNgramModel::save(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }

CharNgramModel CharNgramModel::load(const std::filesystem::path& path) { return deserialize(read_file(path)); }

}  // namespace storyend::ngram
