#include <fmt/format.h>

#include "storyend/backends/backends.hpp"
#include "storyend/common/rng.hpp"
#include "storyend/common/utf8.hpp"

namespace storyend::backends {

namespace {

constexpr bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view text, const std::pair<std::string_view, Enum> (&table)[N], std::string_view what) {
  for (const auto& [name, value] : table) {
    if (name == text) return value;
  }
  std::string names;
  for (const auto& [name, value] : table) {
    if (!names.empty()) names += ", ";
    names += name;
  }
  throw ConfigError(fmt::format("unknown {} '{}' (expected one of: {})", what, text, names));
}

constexpr std::pair<std::string_view, BackendKind> kKinds[] = {
    {"random_selection", BackendKind::kRandomSelection},
    {"char_ngram", BackendKind::kCharNgram},
    {"remote_chat", BackendKind::kRemoteChat},
    {"echo", BackendKind::kEcho},
};
constexpr std::pair<std::string_view, NgramMode> kModes[] = {
    {"paired", NgramMode::kPaired},
    {"unpaired", NgramMode::kUnpaired},
};
constexpr std::pair<std::string_view, PoolSource> kPools[] = {
    {"all", PoolSource::kAll},
    {"train", PoolSource::kTrain},
};

template <typename Enum, std::size_t N>
std::string_view name_of(Enum value, const std::pair<std::string_view, Enum> (&table)[N]) noexcept {
  for (const auto& [name, v] : table) {
    if (v == value) return name;
  }
  return "?";
}

}  // namespace

std::string_view to_string(BackendKind kind) noexcept { return name_of(kind, kKinds); }
std::string_view to_string(NgramMode mode) noexcept { return name_of(mode, kModes); }
std::string_view to_string(PoolSource source) noexcept { return name_of(source, kPools); }
BackendKind parse_backend_kind(std::string_view text) { return parse_enum(text, kKinds, "backend kind"); }
NgramMode parse_ngram_mode(std::string_view text) { return parse_enum(text, kModes, "n-gram mode"); }
PoolSource parse_pool_source(std::string_view text) { return parse_enum(text, kPools, "pool source"); }

void BackendConfig::validate() const {
  if (backend_id.empty()) throw ConfigError("backend_id must be non-empty");
  for (char c : backend_id) {
    if (static_cast<unsigned char>(c) < 0x20 || c == '/' || c == '\\') {
      throw ConfigError(fmt::format("backend_id '{}' contains a forbidden character", backend_id));
    }
  }
  prompt_template().validate();
  switch (kind) {
    case BackendKind::kCharNgram:
      if (model_path.empty() && ngram_order < 2) {
        throw ConfigError(fmt::format("backend '{}': n-gram order must be at least 2", backend_id));
      }
      if (max_chars < 1) throw ConfigError(fmt::format("backend '{}': max_chars must be at least 1", backend_id));
      break;
    case BackendKind::kRemoteChat:
      if (remote.endpoint.base_url.empty() || remote.endpoint.path.empty()) {
        throw ConfigError(fmt::format("backend '{}': remote endpoint url and path are required", backend_id));
      }
      if (remote.model.empty()) throw ConfigError(fmt::format("backend '{}': model name is required", backend_id));
      if (remote.max_tokens < 1) throw ConfigError(fmt::format("backend '{}': max_tokens must be positive", backend_id));
      if (remote.temperature < 0) {
        throw ConfigError(fmt::format("backend '{}': temperature must be non-negative", backend_id));
      }
      if (remote.concurrency < 1) {
        throw ConfigError(fmt::format("backend '{}': concurrency must be at least 1", backend_id));
      }
      if (remote.retry.max_attempts < 1) {
        throw ConfigError(fmt::format("backend '{}': max_attempts must be at least 1", backend_id));
      }
      break;
    case BackendKind::kRandomSelection:
    case BackendKind::kEcho:
      break;
  }
}

PromptTemplate BackendConfig::prompt_template() const {
  if (!custom_template.empty()) return PromptTemplate{"custom", custom_template};
  const std::string name = !template_name.empty() ? template_name : kind == BackendKind::kRemoteChat ? "gpt" : "plain";
  auto t = builtin_template(name);
  if (!t) throw ConfigError(fmt::format("backend '{}': unknown prompt template '{}'", backend_id, name));
  return *t;
}

nlohmann::json to_json(const BackendConfig& c) {
  nlohmann::json j{
      {"backend_id", c.backend_id},
      {"kind", to_string(c.kind)},
      {"seed", c.seed},
      {"template", c.prompt_template().name},
      {"template_pattern", c.prompt_template().pattern},
  };
  switch (c.kind) {
    case BackendKind::kRandomSelection:
      j["pool"] = to_string(c.pool);
      break;
    case BackendKind::kCharNgram:
      j["pool"] = to_string(c.pool);
      j["order"] = c.ngram_order;
      j["mode"] = to_string(c.ngram_mode);
      j["max_chars"] = c.max_chars;
      j["model_path"] = c.model_path;
      break;
    case BackendKind::kRemoteChat:
      j["base_url"] = c.remote.endpoint.base_url;
      j["path"] = c.remote.endpoint.path;
      j["api_key_env"] = c.remote.endpoint.api_key_env;
      j["timeout_ms"] = c.remote.endpoint.timeout.count();
      j["model"] = c.remote.model;
      j["temperature"] = c.remote.temperature;
      j["max_tokens"] = c.remote.max_tokens;
      j["concurrency"] = c.remote.concurrency;
      j["max_attempts"] = c.remote.retry.max_attempts;
      j["initial_delay_ms"] = c.remote.retry.initial_delay.count();
      j["backoff_factor"] = c.remote.retry.backoff_factor;
      j["first_sentence_only"] = c.remote.first_sentence_only;
      break;
    case BackendKind::kEcho:
      break;
  }
  return j;
}

BackendConfig backend_config_from_json(const nlohmann::json& j) {
  BackendConfig c;
  c.backend_id = j.at("backend_id").get<std::string>();
  c.kind = parse_backend_kind(j.at("kind").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  const auto tmpl = j.value("template", std::string{});
  const auto pattern = j.value("template_pattern", std::string{});
  if (tmpl == "custom") {
    c.custom_template = pattern;
  } else {
    c.template_name = tmpl;
  }
  if (j.contains("pool")) c.pool = parse_pool_source(j["pool"].get<std::string>());
  c.ngram_order = j.value("order", c.ngram_order);
  if (j.contains("mode")) c.ngram_mode = parse_ngram_mode(j["mode"].get<std::string>());
  c.max_chars = j.value("max_chars", c.max_chars);
  c.model_path = j.value("model_path", std::string{});
  auto& r = c.remote;
  r.endpoint.base_url = j.value("base_url", r.endpoint.base_url);
  r.endpoint.path = j.value("path", r.endpoint.path);
  r.endpoint.api_key_env = j.value("api_key_env", r.endpoint.api_key_env);
  r.endpoint.timeout = std::chrono::milliseconds(j.value("timeout_ms", r.endpoint.timeout.count()));
  r.model = j.value("model", r.model);
  r.temperature = j.value("temperature", r.temperature);
  r.max_tokens = j.value("max_tokens", r.max_tokens);
  r.concurrency = j.value("concurrency", r.concurrency);
  r.retry.max_attempts = j.value("max_attempts", r.retry.max_attempts);
  r.retry.initial_delay = std::chrono::milliseconds(j.value("initial_delay_ms", r.retry.initial_delay.count()));
  r.retry.backoff_factor = j.value("backoff_factor", r.retry.backoff_factor);
  r.first_sentence_only = j.value("first_sentence_only", r.first_sentence_only);
  return c;
}

nlohmann::json to_json(const GenerationRecord& r) {
  return nlohmann::json{{"story_id", r.story_id},
                        {"backend_id", r.backend_id},
                        {"prompt", r.prompt},
                        {"ending", r.ending},
                        {"created_at", r.created_at}};
}

GenerationRecord generation_record_from_json(const nlohmann::json& j) {
  GenerationRecord r{j.at("story_id").get<std::string>(), j.at("backend_id").get<std::string>(),
                     j.at("prompt").get<std::string>(), j.at("ending").get<std::string>(),
                     j.at("created_at").get<std::string>()};
  if (r.ending.empty()) throw Error(fmt::format("record for story '{}' has an empty ending", r.story_id));
  return r;
}

std::string random_selection_ending(std::span<const std::string> pool, std::uint64_t story_index,
                                    std::uint64_t seed) {
  if (pool.empty()) throw ConfigError("random selection needs a non-empty sentence pool");
  SplitMix64 rng(stream_seed(seed, story_index));
  return pool[static_cast<std::size_t>(rng.below(pool.size()))];
}

std::string char_ngram_ending(const ngram::CharNgramModel& model, std::string_view body, std::uint64_t seed,
                              NgramMode mode, std::size_t max_chars) {
  std::string prime;
  if (mode == NgramMode::kPaired) {
    const auto cps = utf8::decode(body);
    const std::size_t keep = static_cast<std::size_t>(model.order() - 1);
    const std::size_t from = cps.size() > keep ? cps.size() - keep : 0;
    prime = utf8::encode(std::u32string_view(cps).substr(from));
  }
  return trim(model.generate_sentence(seed, prime, max_chars));
}

std::string first_sentence(std::string_view text) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (ngram::is_sentence_terminator(static_cast<unsigned char>(text[i]))) return trim(text.substr(0, i + 1));
  }
  return trim(text);
}

RandomSelectionBackend::RandomSelectionBackend(std::vector<std::string> pool, std::uint64_t seed)
    : pool_(std::move(pool)), seed_(seed) {
  if (pool_.empty()) throw ConfigError("random selection needs a non-empty sentence pool");
}

std::string RandomSelectionBackend::generate(const GenerationRequest& request) {
  return random_selection_ending(pool_, request.story_index, seed_);
}

CharNgramBackend::CharNgramBackend(std::shared_ptr<const ngram::CharNgramModel> model, std::uint64_t seed,
                                   NgramMode mode, std::size_t max_chars)
    : model_(std::move(model)), seed_(seed), mode_(mode), max_chars_(max_chars) {}

std::string CharNgramBackend::generate(const GenerationRequest& request) {
  return char_ngram_ending(*model_, request.body, stream_seed(seed_, request.story_index), mode_, max_chars_);
}

std::string EchoBackend::generate(const GenerationRequest& request) {
  return corpus::segment_story(request.story).ending;
}

RemoteChatBackend::RemoteChatBackend(std::shared_ptr<ChatClient> client) : client_(std::move(client)) {}

std::string RemoteChatBackend::generate(const GenerationRequest& request) {
  auto text = remote_chat_ending(*client_, request.prompt);
  if (client_->settings().first_sentence_only) text = first_sentence(text);
  return text;
}

std::size_t RemoteChatBackend::max_in_flight() const {
  return static_cast<std::size_t>(std::max(1, client_->settings().concurrency));
}

std::unique_ptr<EndingBackend> make_backend(const BackendConfig& config, const BackendResources& res) {
  config.validate();
  const corpus::Corpus* source = config.pool == PoolSource::kTrain ? res.train : res.corpus;
  switch (config.kind) {
    case BackendKind::kEcho:
      return std::make_unique<EchoBackend>();
    case BackendKind::kRandomSelection:
      if (source == nullptr) throw ConfigError(fmt::format("backend '{}': no corpus for the pool", config.backend_id));
      return std::make_unique<RandomSelectionBackend>(corpus::fifth_sentence_pool(*source), config.seed);
    case BackendKind::kCharNgram: {
      std::shared_ptr<const ngram::CharNgramModel> model;
      if (!config.model_path.empty()) {
        model = std::make_shared<const ngram::CharNgramModel>(ngram::CharNgramModel::load(config.model_path));
      } else {
        if (source == nullptr) {
          throw ConfigError(fmt::format("backend '{}': no corpus to fit the model on", config.backend_id));
        }
        std::vector<std::string> texts;
        texts.reserve(source->size());
        for (const auto& story : *source) texts.push_back(corpus::full_text(story));
        model = std::make_shared<const ngram::CharNgramModel>(ngram::CharNgramModel::fit(texts, config.ngram_order));
      }
      return std::make_unique<CharNgramBackend>(std::move(model), config.seed, config.ngram_mode, config.max_chars);
    }
    case BackendKind::kRemoteChat: {
      auto transport = res.transport ? res.transport : std::shared_ptr<http::Transport>(http::make_default_transport());
      auto client = std::make_shared<ChatClient>(config.remote, std::move(transport), res.archive, res.sleeper);
      return std::make_unique<RemoteChatBackend>(std::move(client));
    }
  }
  throw ConfigError("unhandled backend kind");
}

}  // namespace storyend::backends
