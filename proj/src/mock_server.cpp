#include "hotprompt/mock_server.hpp"

#include <httplib.h>

#include "hotprompt/error.hpp"

namespace hotprompt {
namespace {

std::string delta_frame(const std::string& piece) {
  nlohmann::json frame{{"object", "chat.completion.chunk"},
                       {"choices", nlohmann::json::array({{{"index", 0}, {"delta", {{"content", piece}}}}})}};
  return "data: " + frame.dump() + "\n\n";
}

}  // namespace

MockChatServer::MockChatServer(Scenario scenario, std::string required_token)
    : scenario_(std::move(scenario)),
      required_token_(std::move(required_token)),
      server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

MockChatServer::~MockChatServer() { stop(); }

void MockChatServer::install_routes() {
  server_->Get("/health", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("ok", "text/plain");
  });

  server_->Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body = nlohmann::json::parse(req.body, nullptr, false);
    {
      std::lock_guard lock(mutex_);
      requests_.push_back(body);
    }
    if (!required_token_.empty() && req.get_header_value("Authorization") != "Bearer " + required_token_) {
      res.status = 401;
      res.set_content(R"({"error":{"message":"invalid api key"}})", "application/json");
      return;
    }
    if (body.is_discarded() || !body.contains("messages") || !body["messages"].is_array() || body["messages"].empty()) {
      res.status = 400;
      res.set_content(R"({"error":{"message":"messages required"}})", "application/json");
      return;
    }
    const std::string prompt = body["messages"].back().value("content", "");
    const ScenarioRule* rule = scenario_.find(prompt);
    if (!rule) {
      res.status = 404;
      res.set_content(R"({"error":{"message":"no scripted response"}})", "application/json");
      return;
    }
    if (rule->status != 200) {
      res.status = rule->status;
      res.set_content(R"({"error":{"message":"scripted status"}})", "application/json");
      return;
    }
    auto sent = std::make_shared<std::size_t>(0);
    const ScenarioRule copy = *rule;
    res.set_chunked_content_provider("text/event-stream", [this, copy, sent](size_t, httplib::DataSink& sink) {
      if (stopping_) return false;
      std::this_thread::sleep_for(std::chrono::milliseconds(copy.interval_ms));
      if (copy.malformed_after && *sent == *copy.malformed_after) {
        const std::string bad = "data: {\"choices\": [\n\n";
        sink.write(bad.data(), bad.size());
        sink.done();
        return true;
      }
      if (copy.drop_after && *sent == *copy.drop_after) return false;  // connection reset mid-stream
      if (*sent < copy.deltas.size()) {
        const std::string frame = delta_frame(copy.deltas[(*sent)++]);
        return sink.write(frame.data(), frame.size());
      }
      if (copy.hang) return true;
      if (copy.fail) {
        const std::string err = "data: {\"error\":{\"message\":\"scripted failure\"}}\n\n";
        sink.write(err.data(), err.size());
      } else {
        const std::string done = "data: [DONE]\n\n";
        sink.write(done.data(), done.size());
      }
      sink.done();
      return true;
    });
  });
}

int MockChatServer::start(const std::string& host, int port) {
  host_ = host;
  port_ = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (port_ <= 0) throw Error(ErrorCode::BackendUnavailable, "mock server could not bind " + host);
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

bool MockChatServer::listen(const std::string& host, int port) {
  host_ = host;
  port_ = port;
  return server_->listen(host, port);
}

void MockChatServer::stop() {
  stopping_ = true;
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string MockChatServer::base_url() const { return "http://" + host_ + ":" + std::to_string(port_); }

std::vector<nlohmann::json> MockChatServer::requests() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

}  // namespace hotprompt
