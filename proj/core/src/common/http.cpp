#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "storyend/common/http.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include <fmt/format.h>

#include "storyend/common/clock.hpp"

namespace storyend::http {

namespace {

class HttplibTransport final : public Transport {
 public:
  Response post_json(const Endpoint& endpoint, const std::string& body, const std::string& bearer) override {
    httplib::Client client(endpoint.base_url);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(endpoint.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(endpoint.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (!bearer.empty()) headers.emplace("Authorization", "Bearer " + bearer);
    auto result = client.Post(endpoint.path, headers, body, "application/json");
    Response response;
    if (!result) {
      response.transport_error = httplib::to_string(result.error());
      return response;
    }
    response.status = result->status;
    response.body = result->body;
    return response;
  }
};

}  // namespace

std::unique_ptr<Transport> make_default_transport() { return std::make_unique<HttplibTransport>(); }

bool is_retryable(const Response& response) noexcept {
  switch (response.status) {
    case 0: case 429: case 502: case 503: case 504:
      return true;
    default:
      return false;
  }
}

Sleeper real_sleeper() {
  return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::string resolve_bearer(const Endpoint& endpoint) {
  if (endpoint.api_key_env.empty()) return {};
  const char* value = std::getenv(endpoint.api_key_env.c_str());
  if (value == nullptr || *value == '\0') {
    throw ConfigError("environment variable " + endpoint.api_key_env + " is not set (needed for " +
                      endpoint.base_url + ")");
  }
  return value;
}

Exchange post_json_with_retry(Transport& transport, const Endpoint& endpoint, const nlohmann::json& request,
                              const RetryPolicy& policy, ExchangeArchive* archive, const Sleeper& sleep,
                              const std::string& purpose) {
  const std::string bearer = resolve_bearer(endpoint);
  const std::string body = request.dump();
  const int max_attempts = std::max(policy.max_attempts, 1);
  Response last;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    const auto started = std::chrono::steady_clock::now();
    last = transport.post_json(endpoint, body, bearer);
    const auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - started);
    if (archive != nullptr) {
      nlohmann::json entry{{"at", format_timestamp(std::chrono::system_clock::now())},
                           {"purpose", purpose},
                           {"url", endpoint.base_url + endpoint.path},
                           {"attempt", attempt},
                           {"request", request},
                           {"status", last.status},
                           {"latency_ms", latency.count()}};
      auto parsed = nlohmann::json::parse(last.body, nullptr, false);
      entry["response"] = parsed.is_discarded() ? nlohmann::json(last.body) : std::move(parsed);
      if (!last.transport_error.empty()) entry["transport_error"] = last.transport_error;
      archive->record(entry);
    }
    if (last.ok()) {
      auto parsed = nlohmann::json::parse(last.body, nullptr, false);
      if (parsed.is_discarded()) {
        throw RemoteError(fmt::format("{}: response body is not JSON", purpose), last.status, attempt);
      }
      return Exchange{std::move(last), std::move(parsed), attempt};
    }
    if (!is_retryable(last)) {
      throw RemoteError(fmt::format("{}: HTTP {}: {}", purpose, last.status, last.body.substr(0, 300)),
                        last.status, attempt);
    }
    if (attempt < max_attempts) {
      const double factor = std::pow(policy.backoff_factor, attempt - 1);
      sleep(std::chrono::milliseconds(
          static_cast<std::int64_t>(static_cast<double>(policy.initial_delay.count()) * factor)));
    }
  }
  const std::string why = last.status == 0 ? last.transport_error : fmt::format("HTTP {}", last.status);
  throw RemoteError(fmt::format("{}: giving up after {} attempts ({})", purpose, max_attempts, why), last.status,
                    max_attempts);
}

}  // namespace storyend::http
