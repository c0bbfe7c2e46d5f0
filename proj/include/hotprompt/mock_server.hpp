#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <string>
#include <thread>
#include <vector>

#include "hotprompt/gateway.hpp"

namespace httplib {
class Server;
}

namespace hotprompt {

/// Chat-completions look-alike that streams scripted deltas as
/// "data: {"choices":[{"delta":{"content":...}}]}" frames ending in "data: [DONE]".
/// Rules are matched against the last user message.
class MockChatServer {
 public:
  explicit MockChatServer(Scenario scenario, std::string required_token = {});
  ~MockChatServer();
  MockChatServer(const MockChatServer&) = delete;
  MockChatServer& operator=(const MockChatServer&) = delete;

  /// Binds (port 0 picks a free one) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Serves on the calling thread until stop().
  bool listen(const std::string& host, int port);
  void stop();

  std::string base_url() const;
  std::vector<nlohmann::json> requests() const;

 private:
  void install_routes();

  Scenario scenario_;
  std::string required_token_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::atomic<bool> stopping_{false};
  std::string host_ = "127.0.0.1";
  int port_ = 0;
  mutable std::mutex mutex_;
  std::vector<nlohmann::json> requests_;
};

}  // namespace hotprompt
