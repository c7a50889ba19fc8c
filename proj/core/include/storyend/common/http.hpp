#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "storyend/common/error.hpp"
#include "storyend/common/jsonl.hpp"

namespace storyend::http {

/// Transport, status or response-shape failure of a remote call.
class RemoteError : public Error {
 public:
  RemoteError(const std::string& what, int status, int attempts)
      : Error(what), status_(status), attempts_(attempts) {}
  int status() const noexcept { return status_; }
  int attempts() const noexcept { return attempts_; }

 private:
  int status_;
  int attempts_;
};

struct Endpoint {
  std::string base_url;  // scheme://host[:port]
  std::string path;      // e.g. /v1/chat/completions
  std::string api_key_env;  // environment variable holding the bearer token; empty = no auth
  std::chrono::milliseconds timeout{60'000};
};

struct Response {
  int status = 0;  // 0 when the request never completed
  std::string body;
  std::string transport_error;  // set when status == 0

  bool ok() const noexcept { return status >= 200 && status < 300; }
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual Response post_json(const Endpoint& endpoint, const std::string& body, const std::string& bearer) = 0;
};

/// cpp-httplib backed transport; https requires OpenSSL support at build time.
std::unique_ptr<Transport> make_default_transport();

/// Exponential backoff: attempt n (1-based) waits initial_delay * factor^(n-1)
/// before the next try.
struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds initial_delay{1'000};
  double backoff_factor = 2.0;
};

/// 429, 502, 503, 504 and transport failures are retried; everything else is final.
bool is_retryable(const Response& response) noexcept;

using Sleeper = std::function<void(std::chrono::milliseconds)>;
Sleeper real_sleeper();

/// Line-delimited audit log of every HTTP exchange. Safe for concurrent use.
class ExchangeArchive {
 public:
  explicit ExchangeArchive(const std::filesystem::path& path) : log_(path) {}
  void record(const nlohmann::json& entry) { log_.append(entry); }
  const std::filesystem::path& path() const noexcept { return log_.path(); }

 private:
  JsonlAppender log_;
};

struct Exchange {
  Response response;
  nlohmann::json body;  // parsed success body
  int attempts = 0;
};

/// Reads the bearer token named by `endpoint.api_key_env`; throws ConfigError
/// when the variable is named but unset.
std::string resolve_bearer(const Endpoint& endpoint);

/// POSTs `request` with retry. Every attempt is archived (when an archive is
/// given). Returns the parsed JSON body of the first 2xx response; throws
/// RemoteError once attempts are exhausted, on a final status, or when the
/// body is not JSON.
Exchange post_json_with_retry(Transport& transport, const Endpoint& endpoint, const nlohmann::json& request,
                              const RetryPolicy& policy, ExchangeArchive* archive, const Sleeper& sleep,
                              const std::string& purpose);

}  // namespace storyend::http
