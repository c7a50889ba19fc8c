#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "storyend/common/http.hpp"
#include "storyend/corpus/corpus.hpp"
#include "storyend/ngram/char_model.hpp"

namespace storyend::backends {

// ---------------------------------------------------------------------------
// Prompt templates

inline constexpr std::string_view kBodyPlaceholder = "{body}";

struct PromptTemplate {
  std::string name;
  std::string pattern;  // holds exactly one {body}

  /// Throws ConfigError unless the pattern has exactly one placeholder.
  void validate() const;
};

/// "gpt": instruction before the body; "mamba": instruction after the body;
/// "plain": the body alone.
std::optional<PromptTemplate> builtin_template(std::string_view name);

std::string render_prompt(const PromptTemplate& tmpl, std::string_view body);

// ---------------------------------------------------------------------------
// Configuration and records

enum class BackendKind { kRandomSelection, kCharNgram, kRemoteChat, kEcho };
enum class NgramMode { kPaired, kUnpaired };
enum class PoolSource { kAll, kTrain };

std::string_view to_string(BackendKind kind) noexcept;
std::string_view to_string(NgramMode mode) noexcept;
std::string_view to_string(PoolSource source) noexcept;
BackendKind parse_backend_kind(std::string_view text);
NgramMode parse_ngram_mode(std::string_view text);
PoolSource parse_pool_source(std::string_view text);

struct RemoteChatSettings {
  http::Endpoint endpoint{"https://api.openai.com", "/v1/chat/completions", "OPENAI_API_KEY"};
  std::string model = "gpt-3.5-turbo";
  double temperature = 0.7;
  int max_tokens = 60;
  http::RetryPolicy retry;
  int concurrency = 4;               // requests in flight
  bool first_sentence_only = false;  // keep endings verbatim unless set
};

struct BackendConfig {
  std::string backend_id;
  BackendKind kind = BackendKind::kEcho;
  std::uint64_t seed = 0;
  std::string template_name;    // empty: "gpt" for remote_chat, "plain" otherwise
  std::string custom_template;  // overrides template_name when set
  PoolSource pool = PoolSource::kAll;
  int ngram_order = 10;
  NgramMode ngram_mode = NgramMode::kUnpaired;
  std::size_t max_chars = ngram::kDefaultMaxChars;
  std::string model_path;  // pre-fitted character model; fitted on the train split otherwise
  RemoteChatSettings remote;

  void validate() const;
  PromptTemplate prompt_template() const;
};

nlohmann::json to_json(const BackendConfig& config);
BackendConfig backend_config_from_json(const nlohmann::json& j);

struct GenerationRecord {
  std::string story_id;
  std::string backend_id;
  std::string prompt;
  std::string ending;
  std::string created_at;

  bool operator==(const GenerationRecord&) const = default;
};

nlohmann::json to_json(const GenerationRecord& record);
GenerationRecord generation_record_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Backends

struct GenerationRequest {
  const corpus::Story& story;
  std::size_t story_index;  // position in the evaluated split
  std::string body;
  std::string prompt;
};

class EndingBackend {
 public:
  virtual ~EndingBackend() = default;
  virtual std::string generate(const GenerationRequest& request) = 0;
  /// How many generate() calls the harness may run at once.
  virtual std::size_t max_in_flight() const { return 1; }
};

/// pool[r], r drawn from the SplitMix64 stream of (seed, story_index). The
/// story's own gold ending stays in the pool. Throws ConfigError on an empty pool.
std::string random_selection_ending(std::span<const std::string> pool, std::uint64_t story_index,
                                    std::uint64_t seed);

/// Paired mode primes with the last order-1 characters of the body; unpaired
/// mode starts from an empty context and ignores the body. Leading and
/// trailing whitespace is trimmed from the sentence.
std::string char_ngram_ending(const ngram::CharNgramModel& model, std::string_view body, std::uint64_t seed,
                              NgramMode mode, std::size_t max_chars = ngram::kDefaultMaxChars);

/// Text up to and including the first sentence terminator.
std::string first_sentence(std::string_view text);

class RandomSelectionBackend final : public EndingBackend {
 public:
  RandomSelectionBackend(std::vector<std::string> pool, std::uint64_t seed);
  std::string generate(const GenerationRequest& request) override;

 private:
  std::vector<std::string> pool_;
  std::uint64_t seed_;
};

class CharNgramBackend final : public EndingBackend {
 public:
  CharNgramBackend(std::shared_ptr<const ngram::CharNgramModel> model, std::uint64_t seed, NgramMode mode,
                   std::size_t max_chars);
  std::string generate(const GenerationRequest& request) override;

 private:
  std::shared_ptr<const ngram::CharNgramModel> model_;
  std::uint64_t seed_;
  NgramMode mode_;
  std::size_t max_chars_;
};

/// Returns the gold ending; pins the metric ceilings.
class EchoBackend final : public EndingBackend {
 public:
  std::string generate(const GenerationRequest& request) override;
};

struct ChatResult {
  std::string text;
  int attempts = 0;
};

/// OpenAI-compatible chat-completions client: one user message per call.
class ChatClient {
 public:
  ChatClient(RemoteChatSettings settings, std::shared_ptr<http::Transport> transport,
             std::shared_ptr<http::ExchangeArchive> archive, http::Sleeper sleeper = http::real_sleeper());

  nlohmann::json build_request(std::string_view prompt) const;
  /// First choice's message content, whitespace-trimmed. Throws
  /// http::RemoteError on transport/status failures or an empty or malformed body.
  ChatResult complete(std::string_view prompt);
  const RemoteChatSettings& settings() const noexcept { return settings_; }

 private:
  RemoteChatSettings settings_;
  std::shared_ptr<http::Transport> transport_;
  std::shared_ptr<http::ExchangeArchive> archive_;
  http::Sleeper sleeper_;
};

std::string remote_chat_ending(ChatClient& client, std::string_view prompt);

class RemoteChatBackend final : public EndingBackend {
 public:
  explicit RemoteChatBackend(std::shared_ptr<ChatClient> client);
  std::string generate(const GenerationRequest& request) override;
  std::size_t max_in_flight() const override;

 private:
  std::shared_ptr<ChatClient> client_;
};

/// Everything a backend may need besides its config.
struct BackendResources {
  const corpus::Corpus* corpus = nullptr;  // full corpus (pool source "all")
  const corpus::Corpus* train = nullptr;   // train split (pool "train", model fitting)
  std::shared_ptr<http::Transport> transport;
  std::shared_ptr<http::ExchangeArchive> archive;
  http::Sleeper sleeper = http::real_sleeper();
};

std::unique_ptr<EndingBackend> make_backend(const BackendConfig& config, const BackendResources& resources);

}  // namespace storyend::backends
