#pragma once

#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "storyend/common/error.hpp"
#include "storyend/common/http.hpp"

namespace storyend::embeddings {

class EmbeddingError : public Error {
 public:
  using Error::Error;
};

/// One vector per token position, all of the same dimension.
struct EmbeddingMatrix {
  std::vector<std::string> tokens;
  std::vector<std::vector<double>> vectors;
  std::size_t dimension = 0;

  /// Throws EmbeddingError on count/dimension mismatch or non-finite values.
  void validate() const;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  /// Embeds a non-empty batch. Implementations must be safe to call concurrently.
  virtual EmbeddingMatrix embed(std::span<const std::string> tokens) = 0;
  virtual std::string name() const = 0;
};

/// Checks the precondition (non-empty tokens) and the returned matrix.
EmbeddingMatrix embed_tokens(EmbeddingProvider& provider, std::span<const std::string> tokens);

/// dot(u, v) / (|u| |v|) clamped to [-1, 1]; 0 when either vector is zero.
/// Throws EmbeddingError on a dimension mismatch.
double cosine(std::span<const double> u, std::span<const double> v);

/// Test fixture, not a BERT stand-in: every distinct token gets its own axis,
/// assigned in first-seen order over the session. A batch's dimension is the
/// session vocabulary size after the batch, so vectors are comparable only
/// within one batch.
class OneHotEmbedder final : public EmbeddingProvider {
 public:
  EmbeddingMatrix embed(std::span<const std::string> tokens) override;
  std::string name() const override { return "onehot"; }
  std::size_t vocabulary_size() const;

 private:
  mutable std::mutex mutex_;
  std::unordered_map<std::string, std::size_t> axes_;
};

struct RemoteEmbeddingConfig {
  http::Endpoint endpoint{"https://api.openai.com", "/v1/embeddings", "OPENAI_API_KEY"};
  std::string model = "text-embedding-3-small";
  http::RetryPolicy retry;
  /// Send one token per request instead of one batched request.
  bool one_request_per_token = false;
};

/// OpenAI-compatible embeddings client. Each token is embedded on its own
/// (no sentence context) and memoized for the lifetime of the provider.
class RemoteEmbeddingProvider final : public EmbeddingProvider {
 public:
  RemoteEmbeddingProvider(RemoteEmbeddingConfig config, std::shared_ptr<http::Transport> transport,
                          std::shared_ptr<http::ExchangeArchive> archive, http::Sleeper sleeper = http::real_sleeper());

  EmbeddingMatrix embed(std::span<const std::string> tokens) override;
  std::string name() const override { return "remote:" + config_.model; }
  int requests_sent() const;

 private:
  void fetch(const std::vector<std::string>& missing);

  RemoteEmbeddingConfig config_;
  std::shared_ptr<http::Transport> transport_;
  std::shared_ptr<http::ExchangeArchive> archive_;
  http::Sleeper sleeper_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, std::vector<double>> memo_;
  int requests_ = 0;
};

}  // namespace storyend::embeddings
