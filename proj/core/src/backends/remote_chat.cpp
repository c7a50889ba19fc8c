#include <fmt/format.h>

#include "storyend/backends/backends.hpp"

namespace storyend::backends {

ChatClient::ChatClient(RemoteChatSettings settings, std::shared_ptr<http::Transport> transport,
                       std::shared_ptr<http::ExchangeArchive> archive, http::Sleeper sleeper)
    : settings_(std::move(settings)),
      transport_(std::move(transport)),
      archive_(std::move(archive)),
      sleeper_(std::move(sleeper)) {
  if (!transport_) throw ConfigError("chat client needs a transport");
}

nlohmann::json ChatClient::build_request(std::string_view prompt) const {
  return nlohmann::json{
      {"model", settings_.model},
      {"messages", nlohmann::json::array({nlohmann::json{{"role", "user"}, {"content", std::string(prompt)}}})},
      {"temperature", settings_.temperature},
      {"max_tokens", settings_.max_tokens},
  };
}

ChatResult ChatClient::complete(std::string_view prompt) {
  const auto exchange = http::post_json_with_retry(*transport_, settings_.endpoint, build_request(prompt),
                                                   settings_.retry, archive_.get(), sleeper_, "chat");
  const auto& body = exchange.body;
  const auto malformed = [&](const std::string& why) {
    return http::RemoteError(fmt::format("malformed chat response: {}", why), exchange.response.status,
                             exchange.attempts);
  };
  if (!body.is_object() || !body.contains("choices") || !body["choices"].is_array() || body["choices"].empty()) {
    throw malformed("no choices");
  }
  const auto& choice = body["choices"][0];
  if (!choice.is_object() || !choice.contains("message") || !choice["message"].is_object()) {
    throw malformed("first choice has no message");
  }
  const auto& content = choice["message"].value("content", nlohmann::json());
  if (!content.is_string()) throw malformed("message content is not a string");

  const auto& raw = content.get_ref<const std::string&>();
  const auto b = raw.find_first_not_of(" \t\r\n\f\v");
  if (b == std::string::npos) throw malformed("empty completion");
  const auto e = raw.find_last_not_of(" \t\r\n\f\v");
  return ChatResult{raw.substr(b, e - b + 1), exchange.attempts};
}

std::string remote_chat_ending(ChatClient& client, std::string_view prompt) { return client.complete(prompt).text; }

}  // namespace storyend::backends
