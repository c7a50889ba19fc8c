#include "mock_server.hpp"

#include <atomic>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>

namespace storyend::testing {

struct MockServer::Impl {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<int> hits{0};
};

MockServer::MockServer(Handler handler) : impl_(std::make_unique<Impl>()) {
  auto* impl = impl_.get();
  impl->server.Post(".*", [impl, handler](const httplib::Request& req, httplib::Response& res) {
    ++impl->hits;
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::parse_error&) {
      res.status = 400;
      return;
    }
    const auto reply = handler(req.path, body);
    res.status = reply.status;
    res.set_content(reply.body, "application/json");
  });
  impl->port = impl->server.bind_to_any_port("127.0.0.1");
  if (impl->port <= 0) throw std::runtime_error("mock server could not bind a port");
  impl->thread = std::thread([impl] { impl->server.listen_after_bind(); });
  impl->server.wait_until_ready();
}

MockServer::~MockServer() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::string MockServer::base_url() const { return fmt::format("http://127.0.0.1:{}", impl_->port); }

int MockServer::hits() const { return impl_->hits.load(); }

}  // namespace storyend::testing
