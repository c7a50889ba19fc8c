#include "storyend/embeddings/embeddings.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace storyend::embeddings {

void EmbeddingMatrix::validate() const {
  if (vectors.size() != tokens.size()) {
    throw EmbeddingError(fmt::format("{} vectors for {} tokens", vectors.size(), tokens.size()));
  }
  if (dimension == 0 && !vectors.empty()) throw EmbeddingError("embedding dimension is 0");
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != dimension) {
      throw EmbeddingError(fmt::format("vector {} has dimension {}, expected {}", i, vectors[i].size(), dimension));
    }
    if (!std::all_of(vectors[i].begin(), vectors[i].end(), [](double x) { return std::isfinite(x); })) {
      throw EmbeddingError(fmt::format("vector {} has a non-finite component", i));
    }
  }
}

EmbeddingMatrix embed_tokens(EmbeddingProvider& provider, std::span<const std::string> tokens) {
  if (tokens.empty()) throw EmbeddingError("cannot embed an empty token list");
  auto matrix = provider.embed(tokens);
  matrix.validate();
  if (matrix.tokens.size() != tokens.size()) {
    throw EmbeddingError(fmt::format("provider {} returned {} vectors for {} tokens", provider.name(),
                                     matrix.tokens.size(), tokens.size()));
  }
  return matrix;
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw EmbeddingError(fmt::format("cosine of {}-dim and {}-dim vectors", u.size(), v.size()));
  double dot = 0.0;
  double uu = 0.0;
  double vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

EmbeddingMatrix OneHotEmbedder::embed(std::span<const std::string> tokens) {
  std::vector<std::size_t> axes;
  axes.reserve(tokens.size());
  std::size_t dimension = 0;
  {
    std::lock_guard lock(mutex_);
    for (const auto& token : tokens) axes.push_back(axes_.try_emplace(token, axes_.size()).first->second);
    dimension = axes_.size();
  }
  EmbeddingMatrix matrix;
  matrix.tokens.assign(tokens.begin(), tokens.end());
  matrix.dimension = dimension;
  matrix.vectors.reserve(tokens.size());
  for (std::size_t axis : axes) {
    std::vector<double> v(dimension, 0.0);
    v[axis] = 1.0;
    matrix.vectors.push_back(std::move(v));
  }
  return matrix;
}

std::size_t OneHotEmbedder::vocabulary_size() const {
  std::lock_guard lock(mutex_);
  return axes_.size();
}

RemoteEmbeddingProvider::RemoteEmbeddingProvider(RemoteEmbeddingConfig config,
                                                 std::shared_ptr<http::Transport> transport,
                                                 std::shared_ptr<http::ExchangeArchive> archive,
                                                 http::Sleeper sleeper)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      archive_(std::move(archive)),
      sleeper_(std::move(sleeper)) {
  if (!transport_) throw ConfigError("remote embedding provider needs a transport");
}

int RemoteEmbeddingProvider::requests_sent() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

void RemoteEmbeddingProvider::fetch(const std::vector<std::string>& missing) {
  auto request_batch = [&](std::span<const std::string> batch) {
    nlohmann::json request{{"model", config_.model}, {"input", batch}};
    const auto exchange = http::post_json_with_retry(*transport_, config_.endpoint, request, config_.retry,
                                                     archive_.get(), sleeper_, "embeddings");
    const auto& data = exchange.body.contains("data") ? exchange.body["data"] : nlohmann::json();
    if (!data.is_array() || data.size() != batch.size()) {
      throw http::RemoteError("embeddings: response 'data' does not hold one entry per input",
                              exchange.response.status, exchange.attempts);
    }
    std::vector<std::vector<double>> vectors(batch.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto& item = data[i];
      const std::size_t slot = item.contains("index") && item["index"].is_number_unsigned()
                                   ? item["index"].get<std::size_t>()
                                   : i;
      if (slot >= batch.size() || !item.contains("embedding") || !item["embedding"].is_array()) {
        throw http::RemoteError("embeddings: malformed data entry", exchange.response.status, exchange.attempts);
      }
      try {
        vectors[slot] = item["embedding"].get<std::vector<double>>();
      } catch (const nlohmann::json::exception&) {
        throw http::RemoteError("embeddings: non-numeric embedding", exchange.response.status, exchange.attempts);
      }
    }
    std::lock_guard lock(mutex_);
    ++requests_;
    for (std::size_t i = 0; i < batch.size(); ++i) memo_[batch[i]] = std::move(vectors[i]);
  };

  if (config_.one_request_per_token) {
    for (const auto& token : missing) request_batch(std::span(&token, 1));
  } else {
    request_batch(missing);
  }
}

EmbeddingMatrix RemoteEmbeddingProvider::embed(std::span<const std::string> tokens) {
  std::vector<std::string> missing;
  {
    std::lock_guard lock(mutex_);
    for (const auto& token : tokens) {
      if (!memo_.contains(token) && std::find(missing.begin(), missing.end(), token) == missing.end()) {
        missing.push_back(token);
      }
    }
  }
  if (!missing.empty()) fetch(missing);

  EmbeddingMatrix matrix;
  matrix.tokens.assign(tokens.begin(), tokens.end());
  std::lock_guard lock(mutex_);
  for (const auto& token : tokens) matrix.vectors.push_back(memo_.at(token));
  matrix.dimension = matrix.vectors.empty() ? 0 : matrix.vectors.front().size();
  matrix.validate();
  return matrix;
}

}  // namespace storyend::embeddings
