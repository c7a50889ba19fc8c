#include "storyend/harness/config.hpp"

#include <charconv>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "storyend/common/jsonl.hpp"

namespace storyend::harness {

namespace pt = boost::property_tree;
namespace fs = std::filesystem;

namespace {

constexpr std::string_view kBackendPrefix = "backend:";
constexpr std::string_view kManifestFormat = "storyend-run v1";

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto piece = trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start));
    if (!piece.empty()) out.push_back(piece);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

/// Typed access to one INI section that remembers which keys were consumed.
class Section {
 public:
  Section(std::string name, const pt::ptree* tree) : name_(std::move(name)), tree_(tree) {}

  bool has(const std::string& key) const { return tree_ != nullptr && tree_->find(key) != tree_->not_found(); }

  std::string text(const std::string& key, const std::string& fallback) {
    used_.insert(key);
    if (!has(key)) return fallback;
    return trim(tree_->find(key)->second.data());
  }

  template <typename Int>
  Int integer(const std::string& key, Int fallback) {
    if (!has(key)) return fallback;
    const auto s = text(key, "");
    Int value{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
      throw ConfigError(fmt::format("[{}] {}: '{}' is not a valid integer", name_, key, s));
    }
    return value;
  }

  double real(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const auto s = text(key, "");
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError(fmt::format("[{}] {}: '{}' is not a number", name_, key, s));
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const auto s = text(key, "");
    if (s == "true" || s == "yes" || s == "1") return true;
    if (s == "false" || s == "no" || s == "0") return false;
    throw ConfigError(fmt::format("[{}] {}: '{}' is not a boolean", name_, key, s));
  }

  void reject_unknown() const {
    if (tree_ == nullptr) return;
    for (const auto& [key, value] : *tree_) {
      if (!used_.contains(key)) throw ConfigError(fmt::format("[{}]: unknown key '{}'", name_, key));
    }
  }

 private:
  std::string name_;
  const pt::ptree* tree_;
  std::set<std::string> used_;
};

Section section(const pt::ptree& root, const std::string& name) {
  const auto it = root.find(name);
  return Section(name, it == root.not_found() ? nullptr : &it->second);
}

void read_endpoint(Section& s, http::Endpoint& ep) {
  ep.base_url = s.text("base_url", ep.base_url);
  ep.path = s.text("path", ep.path);
  ep.api_key_env = s.text("api_key_env", ep.api_key_env);
  ep.timeout = std::chrono::milliseconds(s.integer<long long>("timeout_ms", ep.timeout.count()));
}

void read_retry(Section& s, http::RetryPolicy& r) {
  r.max_attempts = s.integer<int>("max_attempts", r.max_attempts);
  r.initial_delay = std::chrono::milliseconds(s.integer<long long>("initial_delay_ms", r.initial_delay.count()));
  r.backoff_factor = s.real("backoff_factor", r.backoff_factor);
}

backends::BackendConfig read_backend(Section& s, const std::string& id, std::uint64_t run_seed) {
  backends::BackendConfig c;
  c.backend_id = id;
  c.kind = backends::parse_backend_kind(s.text("kind", ""));
  c.seed = s.integer<std::uint64_t>("seed", run_seed);
  c.template_name = s.text("template", "");
  c.custom_template = s.text("template_pattern", "");
  c.pool = backends::parse_pool_source(s.text("pool", "all"));
  c.ngram_order = s.integer<int>("order", c.ngram_order);
  c.ngram_mode = backends::parse_ngram_mode(s.text("mode", "unpaired"));
  c.max_chars = s.integer<std::size_t>("max_chars", c.max_chars);
  c.model_path = s.text("model_path", "");
  read_endpoint(s, c.remote.endpoint);
  c.remote.model = s.text("model", c.remote.model);
  c.remote.temperature = s.real("temperature", c.remote.temperature);
  c.remote.max_tokens = s.integer<int>("max_tokens", c.remote.max_tokens);
  c.remote.concurrency = s.integer<int>("concurrency", c.remote.concurrency);
  c.remote.first_sentence_only = s.boolean("first_sentence_only", c.remote.first_sentence_only);
  read_retry(s, c.remote.retry);
  return c;
}

nlohmann::json endpoint_json(const http::Endpoint& ep) {
  return {{"base_url", ep.base_url},
          {"path", ep.path},
          {"api_key_env", ep.api_key_env},
          {"timeout_ms", ep.timeout.count()}};
}

http::Endpoint endpoint_from_json(const nlohmann::json& j) {
  return http::Endpoint{j.at("base_url").get<std::string>(), j.at("path").get<std::string>(),
                        j.at("api_key_env").get<std::string>(),
                        std::chrono::milliseconds(j.at("timeout_ms").get<long long>())};
}

}  // namespace

void RunConfig::validate() const {
  if (run_id.empty()) throw ConfigError("run id must be non-empty");
  if (corpus_paths.empty()) throw ConfigError("no corpus paths configured");
  if (split.train_fraction.num > split.train_fraction.den) throw ConfigError("train fraction exceeds 1");
  if (backends.empty()) throw ConfigError("no backends configured");
  std::set<std::string> ids;
  for (const auto& b : backends) {
    b.validate();
    if (!ids.insert(b.backend_id).second) throw ConfigError(fmt::format("duplicate backend id '{}'", b.backend_id));
  }
  metrics.validate();
  if (embedder.kind != "onehot" && embedder.kind != "remote") {
    throw ConfigError(fmt::format("unknown embedding provider '{}'", embedder.kind));
  }
  if (scorer.kind == "word_lm") {
    if (scorer.order < 1) throw ConfigError("scorer order must be at least 1");
    if (!(scorer.alpha > 0)) throw ConfigError("scorer alpha must be positive");
  } else if (scorer.kind == "uniform") {
    if (scorer.uniform_vocabulary < 1) throw ConfigError("uniform scorer needs a positive vocabulary size");
  } else {
    throw ConfigError(fmt::format("unknown scorer '{}'", scorer.kind));
  }
  if (clock.mode == "fixed") {
    parse_timestamp(clock.fixed_time);
  } else if (clock.mode != "system") {
    throw ConfigError(fmt::format("unknown clock mode '{}'", clock.mode));
  }
}

RunConfig parse_run_config(const std::string& ini_text, const fs::path& base_dir) {
  pt::ptree root;
  try {
    std::istringstream in(ini_text);
    pt::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("config line {}: {}", e.line(), e.message()));
  }

  RunConfig c;
  auto run = section(root, "run");
  c.run_id = run.text("id", c.run_id);
  c.seed = run.integer<std::uint64_t>("seed", c.seed);
  c.clock.mode = run.text("clock", c.clock.mode);
  c.clock.fixed_time = run.text("fixed_time", c.clock.fixed_time);
  run.reject_unknown();

  auto corpus_sec = section(root, "corpus");
  for (const auto& p : split_list(corpus_sec.text("paths", ""))) {
    fs::path path(p);
    c.corpus_paths.push_back(path.is_absolute() ? path : (base_dir / path).lexically_normal());
  }
  corpus_sec.reject_unknown();

  auto split = section(root, "split");
  c.split.train_fraction = corpus::Fraction::parse(split.text("train_fraction", "4/5"));
  c.split.seed = split.integer<std::uint64_t>("seed", c.seed);
  c.test_limit = split.integer<std::size_t>("test_limit", 0);
  split.reject_unknown();

  auto m = section(root, "metrics");
  c.metrics.tokenizer.lowercase = m.boolean("lowercase", true);
  c.metrics.bleu_max_n = m.integer<int>("bleu_max_n", c.metrics.bleu_max_n);
  if (m.has("rouge_n")) {
    c.metrics.rouge_n_orders.clear();
    for (const auto& piece : split_list(m.text("rouge_n", ""))) {
      int n = 0;
      const auto [ptr, ec] = std::from_chars(piece.data(), piece.data() + piece.size(), n);
      if (ec != std::errc{} || ptr != piece.data() + piece.size()) {
        throw ConfigError(fmt::format("[metrics] rouge_n: '{}' is not an integer", piece));
      }
      c.metrics.rouge_n_orders.push_back(n);
    }
  }
  c.metrics.meteor_alpha = m.real("meteor_alpha", c.metrics.meteor_alpha);
  c.metrics.meteor_beta = m.real("meteor_beta", c.metrics.meteor_beta);
  c.metrics.meteor_gamma = m.real("meteor_gamma", c.metrics.meteor_gamma);
  m.reject_unknown();

  auto e = section(root, "embeddings");
  c.embedder.kind = e.text("provider", c.embedder.kind);
  c.embedder.remote.model = e.text("model", c.embedder.remote.model);
  c.embedder.remote.one_request_per_token = e.boolean("one_request_per_token", false);
  read_endpoint(e, c.embedder.remote.endpoint);
  read_retry(e, c.embedder.remote.retry);
  e.reject_unknown();

  auto s = section(root, "scorer");
  c.scorer.kind = s.text("kind", c.scorer.kind);
  c.scorer.order = s.integer<int>("order", c.scorer.order);
  c.scorer.alpha = s.real("alpha", c.scorer.alpha);
  c.scorer.uniform_vocabulary = s.integer<std::size_t>("vocabulary", 0);
  s.reject_unknown();

  for (const auto& [name, tree] : root) {
    if (name == "run" || name == "corpus" || name == "split" || name == "metrics" || name == "embeddings" ||
        name == "scorer") {
      continue;
    }
    if (!name.starts_with(kBackendPrefix)) throw ConfigError(fmt::format("unknown config section [{}]", name));
    const auto id = trim(std::string_view(name).substr(kBackendPrefix.size()));
    Section b(name, &tree);
    auto backend = read_backend(b, id, c.seed);
    b.reject_unknown();
    if (backend.kind == backends::BackendKind::kCharNgram && !backend.model_path.empty()) {
      fs::path mp(backend.model_path);
      if (mp.is_relative()) backend.model_path = (base_dir / mp).lexically_normal().string();
    }
    c.backends.push_back(std::move(backend));
  }

  c.validate();
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  return parse_run_config(read_file(path), path.parent_path());
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json paths = nlohmann::json::array();
  for (const auto& p : c.corpus_paths) paths.push_back(p.string());
  nlohmann::json backends = nlohmann::json::array();
  for (const auto& b : c.backends) backends.push_back(backends::to_json(b));
  return nlohmann::json{
      {"run_id", c.run_id},
      {"seed", c.seed},
      {"corpus_paths", paths},
      {"split", {{"train_fraction", c.split.train_fraction.to_string()}, {"seed", c.split.seed},
                 {"test_limit", c.test_limit}}},
      {"backends", backends},
      {"metrics", {{"lowercase", c.metrics.tokenizer.lowercase},
                   {"bleu_max_n", c.metrics.bleu_max_n},
                   {"rouge_n", c.metrics.rouge_n_orders},
                   {"meteor_alpha", c.metrics.meteor_alpha},
                   {"meteor_beta", c.metrics.meteor_beta},
                   {"meteor_gamma", c.metrics.meteor_gamma}}},
      {"embeddings", {{"provider", c.embedder.kind},
                      {"model", c.embedder.remote.model},
                      {"endpoint", endpoint_json(c.embedder.remote.endpoint)},
                      {"max_attempts", c.embedder.remote.retry.max_attempts},
                      {"initial_delay_ms", c.embedder.remote.retry.initial_delay.count()},
                      {"backoff_factor", c.embedder.remote.retry.backoff_factor},
                      {"one_request_per_token", c.embedder.remote.one_request_per_token}}},
      {"scorer", {{"kind", c.scorer.kind}, {"order", c.scorer.order}, {"alpha", c.scorer.alpha},
                  {"vocabulary", c.scorer.uniform_vocabulary}}},
      {"clock", {{"mode", c.clock.mode}, {"fixed_time", c.clock.fixed_time}}},
  };
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  c.run_id = j.at("run_id").get<std::string>();
  c.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& p : j.at("corpus_paths")) c.corpus_paths.emplace_back(p.get<std::string>());
  const auto& split = j.at("split");
  c.split.train_fraction = corpus::Fraction::parse(split.at("train_fraction").get<std::string>());
  c.split.seed = split.at("seed").get<std::uint64_t>();
  c.test_limit = split.at("test_limit").get<std::size_t>();
  for (const auto& b : j.at("backends")) c.backends.push_back(backends::backend_config_from_json(b));
  const auto& m = j.at("metrics");
  c.metrics.tokenizer.lowercase = m.at("lowercase").get<bool>();
  c.metrics.bleu_max_n = m.at("bleu_max_n").get<int>();
  c.metrics.rouge_n_orders = m.at("rouge_n").get<std::vector<int>>();
  c.metrics.meteor_alpha = m.at("meteor_alpha").get<double>();
  c.metrics.meteor_beta = m.at("meteor_beta").get<double>();
  c.metrics.meteor_gamma = m.at("meteor_gamma").get<double>();
  const auto& e = j.at("embeddings");
  c.embedder.kind = e.at("provider").get<std::string>();
  c.embedder.remote.model = e.at("model").get<std::string>();
  c.embedder.remote.endpoint = endpoint_from_json(e.at("endpoint"));
  c.embedder.remote.retry.max_attempts = e.at("max_attempts").get<int>();
  c.embedder.remote.retry.initial_delay = std::chrono::milliseconds(e.at("initial_delay_ms").get<long long>());
  c.embedder.remote.retry.backoff_factor = e.at("backoff_factor").get<double>();
  c.embedder.remote.one_request_per_token = e.at("one_request_per_token").get<bool>();
  const auto& s = j.at("scorer");
  c.scorer.kind = s.at("kind").get<std::string>();
  c.scorer.order = s.at("order").get<int>();
  c.scorer.alpha = s.at("alpha").get<double>();
  c.scorer.uniform_vocabulary = s.at("vocabulary").get<std::size_t>();
  c.clock.mode = j.at("clock").at("mode").get<std::string>();
  c.clock.fixed_time = j.at("clock").at("fixed_time").get<std::string>();
  return c;
}

std::unique_ptr<Clock> make_clock(const ClockConfig& config) {
  if (config.mode == "fixed") return std::make_unique<FixedClock>(parse_timestamp(config.fixed_time));
  return std::make_unique<SystemClock>();
}

bool RunManifest::operator==(const RunManifest& o) const {
  return to_json(*this) == to_json(o);
}

nlohmann::json to_json(const RunManifest& m) {
  return nlohmann::json{
      {"format", kManifestFormat},
      {"config", to_json(m.config)},
      {"corpus", {{"fingerprint", m.corpus_fingerprint}, {"stories", m.corpus_stories}}},
      {"started_at", m.started_at},
      {"finished_at", m.finished_at.empty() ? nlohmann::json() : nlohmann::json(m.finished_at)},
  };
}

RunManifest manifest_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string{}) != kManifestFormat) {
    throw ConfigError("not a storyend run manifest (unknown or missing format tag)");
  }
  RunManifest m;
  m.config = run_config_from_json(j.at("config"));
  m.corpus_fingerprint = j.at("corpus").at("fingerprint").get<std::string>();
  m.corpus_stories = j.at("corpus").at("stories").get<std::size_t>();
  m.started_at = j.at("started_at").get<std::string>();
  if (j.contains("finished_at") && j["finished_at"].is_string()) m.finished_at = j["finished_at"].get<std::string>();
  return m;
}

corpus::Corpus load_corpus_files(const std::vector<fs::path>& paths) {
  auto result = corpus::load_rocstories(std::span<const fs::path>(paths));
  return std::move(result.corpus);
}

void save_manifest(const fs::path& run_dir, const RunManifest& manifest) {
  write_file_atomic(RunPaths{run_dir}.manifest(), to_json(manifest).dump(2) + "\n");
}

namespace {

RunManifest read_manifest(const fs::path& run_dir) {
  const auto path = RunPaths{run_dir}.manifest();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return manifest_from_json(j);
}

}  // namespace

RunManifest create_or_open_manifest(const fs::path& run_dir, const RunConfig& config, const Clock& clock) {
  config.validate();
  const RunPaths paths{run_dir};
  if (fs::exists(paths.manifest())) {
    auto existing = read_manifest(run_dir);
    if (to_json(existing.config) != to_json(config)) {
      throw ConfigError(fmt::format("{} was created for a different configuration; use a new run directory",
                                    paths.manifest().string()));
    }
    return existing;
  }
  const auto corpus = load_corpus_files(config.corpus_paths);
  RunManifest m;
  m.config = config;
  m.corpus_fingerprint = corpus::corpus_fingerprint(corpus);
  m.corpus_stories = corpus.size();
  m.started_at = timestamp_now(clock);
  fs::create_directories(run_dir);
  save_manifest(run_dir, m);
  return m;
}

LoadedRun open_run(const fs::path& run_dir) {
  LoadedRun run;
  run.manifest = read_manifest(run_dir);
  run.corpus = load_corpus_files(run.manifest.config.corpus_paths);
  const auto fingerprint = corpus::corpus_fingerprint(run.corpus);
  if (fingerprint != run.manifest.corpus_fingerprint) {
    throw StaleRunError(fmt::format("corpus fingerprint {} does not match the manifest's {}; the run is stale",
                                    fingerprint.substr(0, 12), run.manifest.corpus_fingerprint.substr(0, 12)));
  }
  run.split = corpus::split_corpus(run.corpus, run.manifest.config.split);
  const auto& test = run.split.test.stories();
  const std::size_t n = run.manifest.config.test_limit == 0 ? test.size()
                                                            : std::min(test.size(), run.manifest.config.test_limit);
  run.evaluated.reserve(n);
  for (std::size_t i = 0; i < n; ++i) run.evaluated.push_back(&test[i]);
  return run;
}

}  // namespace storyend::harness
