#include "hotprompt/gateway.hpp"

#include <cstdlib>
#include <fstream>
#include <httplib.h>
#include <nlohmann/json.hpp>
#include <sstream>

#include "hotprompt/bridge.hpp"
#include "hotprompt/error.hpp"

namespace hotprompt {

std::string_view to_string(FailureKind kind) noexcept {
  switch (kind) {
    case FailureKind::Cancelled: return "Cancelled";
    case FailureKind::AuthFailed: return "AuthFailed";
    case FailureKind::BackendUnavailable: return "BackendUnavailable";
    case FailureKind::HardTimeout: return "HardTimeout";
    case FailureKind::ProtocolError: return "ProtocolError";
    case FailureKind::ConnectionLost: return "ConnectionLost";
    case FailureKind::RediscoveryFailed: return "RediscoveryFailed";
  }
  return "BackendUnavailable";
}

std::optional<FailureKind> parse_failure_kind(std::string_view name) {
  for (auto k : {FailureKind::Cancelled, FailureKind::AuthFailed, FailureKind::BackendUnavailable,
                 FailureKind::HardTimeout, FailureKind::ProtocolError, FailureKind::ConnectionLost,
                 FailureKind::RediscoveryFailed})
    if (to_string(k) == name) return k;
  return std::nullopt;
}

std::string describe(const ResponseEvent& e) {
  if (const auto* c = std::get_if<Chunk>(&e)) return "Chunk(" + c->accumulated_text + ")";
  if (const auto* d = std::get_if<Done>(&e)) return "Done(" + d->final_text + ")";
  const auto& f = std::get<Failed>(e);
  return "Failed(" + std::string(to_string(f.kind)) + ", " + f.detail + ", partial=" + f.partial_text + ")";
}

// --- quiescence ---------------------------------------------------------------

void QuiescenceRule::validate() const {
  if (window <= 0 || window >= hard_timeout)
    throw Error(ErrorCode::ConfigInvalid, "quiescence needs 0 < window < hard_timeout (got " +
                                              std::to_string(window) + ", " + std::to_string(hard_timeout) + ")");
}

QuiescenceTracker::QuiescenceTracker(QuiescenceRule rule, Millis started)
    : rule_(rule), started_(started), last_change_(started) {}

std::optional<ResponseEvent> QuiescenceTracker::observe(std::string content, Millis now) {
  if (finished_) return std::nullopt;
  if (seen_content_ && content == content_) return std::nullopt;
  seen_content_ = true;
  content_ = std::move(content);
  last_change_ = now;
  return Chunk{content_};
}

std::optional<ResponseEvent> QuiescenceTracker::poll(Millis now) {
  if (finished_) return std::nullopt;
  if (seen_content_ && now - last_change_ >= rule_.window) {
    finished_ = true;
    return Done{content_};
  }
  if (now - started_ >= rule_.hard_timeout) {
    finished_ = true;
    return Failed{FailureKind::HardTimeout, "no settled response within " + std::to_string(rule_.hard_timeout) + " ms",
                  content_};
  }
  return std::nullopt;
}

// --- gateway ------------------------------------------------------------------

LlmGateway::LlmGateway(std::unique_ptr<Backend> backend, const Clock& clock, QuiescenceRule rule)
    : backend_(std::move(backend)), clock_(clock), rule_(rule) {
  rule_.validate();
}

LlmGateway::~LlmGateway() {
  std::vector<std::string> ids;
  {
    std::lock_guard lock(mutex_);
    for (const auto& [id, f] : flights_) ids.push_back(id);
    flights_.clear();
    sink_ = nullptr;
  }
  for (const auto& id : ids) backend_->stop(id);
  // Backend workers may still call deliver() until they are joined here, so
  // the backend goes before the mutex and flight table.
  backend_.reset();
}

void LlmGateway::set_sink(EventSink sink) {
  std::lock_guard lock(mutex_);
  sink_ = std::move(sink);
}

std::string LlmGateway::submit(const ChatSession& session, std::string prompt) {
  BackendRequest request;
  {
    std::lock_guard lock(mutex_);
    for (const auto& [id, f] : flights_)
      if (f.session == session.key.normalized())
        throw Error(ErrorCode::Busy, "session already has request " + id + " in flight");
    request.request_id = "req-" + std::to_string(++counter_);
    request.session = session.key;
    request.backend_session_ref = session.backend_session_ref;
    request.history = session.exchanges;
    request.prompt = std::move(prompt);
    request.created = clock_.now();
    flights_[request.request_id] = Flight{session.key.normalized(), request.created, {}};
  }
  try {
    backend_->start(request, [this](const std::string& id, ResponseEvent e) { deliver(id, std::move(e)); });
  } catch (const Error& e) {
    std::lock_guard lock(mutex_);
    flights_.erase(request.request_id);
    if (e.code() == ErrorCode::BackendUnavailable) throw;
    throw Error(ErrorCode::BackendUnavailable, e.what());
  }
  return request.request_id;
}

void LlmGateway::preload(const ChatSession& session) {
  try {
    backend_->preload(session);
  } catch (const std::exception&) {
    // Preloading is best effort; submit reports the failure.
  }
}

void LlmGateway::cancel(const std::string& request_id) {
  std::lock_guard lock(mutex_);
  auto it = flights_.find(request_id);
  if (it == flights_.end()) throw Error(ErrorCode::UnknownRequest, "no request " + request_id + " in flight");
  std::string partial = it->second.last_text;
  flights_.erase(it);
  backend_->stop(request_id);
  if (sink_) sink_(request_id, Failed{FailureKind::Cancelled, "cancelled", std::move(partial)});
}

void LlmGateway::tick(Millis now) {
  backend_->tick(now);
  std::vector<std::string> expired;
  {
    std::lock_guard lock(mutex_);
    for (const auto& [id, f] : flights_)
      if (now - f.created >= rule_.hard_timeout) expired.push_back(id);
  }
  for (const auto& id : expired) {
    std::lock_guard lock(mutex_);
    auto it = flights_.find(id);
    if (it == flights_.end()) continue;
    std::string partial = it->second.last_text;
    flights_.erase(it);
    backend_->stop(id);
    if (sink_)
      sink_(id, Failed{FailureKind::HardTimeout, "no response within " + std::to_string(rule_.hard_timeout) + " ms",
                       std::move(partial)});
  }
}

void LlmGateway::deliver(const std::string& request_id, ResponseEvent event) {
  std::lock_guard lock(mutex_);
  auto it = flights_.find(request_id);
  if (it == flights_.end()) return;  // already terminal or cancelled
  if (const auto* c = std::get_if<Chunk>(&event)) {
    // Repeated or rewritten (non-extending) content is dropped; the terminal event carries the final text.
    if (!c->accumulated_text.starts_with(it->second.last_text) || c->accumulated_text == it->second.last_text) return;
    it->second.last_text = c->accumulated_text;
  } else {
    flights_.erase(it);
  }
  if (sink_) sink_(request_id, std::move(event));
}

bool LlmGateway::in_flight(const std::string& request_id) const {
  std::lock_guard lock(mutex_);
  return flights_.contains(request_id);
}

std::size_t LlmGateway::in_flight_count() const {
  std::lock_guard lock(mutex_);
  return flights_.size();
}

// --- scenarios ----------------------------------------------------------------

Scenario Scenario::parse(std::string_view text) {
  Scenario scenario;
  try {
    nlohmann::json doc = nlohmann::json::parse(text);
    for (const auto& r : doc.at("responses")) {
      ScenarioRule rule;
      rule.match = r.value("match", "");
      if (r.contains("deltas")) {
        rule.deltas = r["deltas"].get<std::vector<std::string>>();
      } else if (r.contains("chunks")) {
        std::string prev;
        for (const auto& c : r["chunks"].get<std::vector<std::string>>()) {
          if (!c.starts_with(prev))
            throw Error(ErrorCode::ConfigInvalid, "scenario chunks must extend each other: '" + c + "'");
          rule.deltas.push_back(c.substr(prev.size()));
          prev = c;
        }
      }
      rule.interval_ms = r.value("interval_ms", Millis{20});
      if (r.contains("fail")) {
        auto kind = parse_failure_kind(r["fail"].get<std::string>());
        if (!kind) throw Error(ErrorCode::ConfigInvalid, "unknown failure kind " + r["fail"].dump());
        rule.fail = kind;
      }
      rule.status = r.value("status", 200);
      if (r.contains("drop_after")) rule.drop_after = r["drop_after"].get<std::size_t>();
      if (r.contains("malformed_after")) rule.malformed_after = r["malformed_after"].get<std::size_t>();
      rule.hang = r.value("hang", false);
      rule.chat_ref = r.value("chat_ref", "");
      scenario.responses.push_back(std::move(rule));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("bad scenario: ") + e.what());
  }
  return scenario;
}

Scenario Scenario::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigInvalid, "cannot open scenario " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

const ScenarioRule* Scenario::find(std::string_view prompt) const {
  for (const auto& r : responses)
    if (prompt.find(r.match) != std::string_view::npos) return &r;
  return nullptr;
}

// --- mock backend ----------------------------------------------------------------

MockBackend::MockBackend(Scenario scenario, const Clock& clock) : scenario_(std::move(scenario)), clock_(clock) {}

void MockBackend::preload(const ChatSession&) {
  std::lock_guard lock(mutex_);
  ++preloads_;
}

void MockBackend::start(const BackendRequest& request, EventSink sink) {
  std::lock_guard lock(mutex_);
  seen_.push_back(request);
  runs_[request.request_id] = Run{request, scenario_.find(request.prompt), std::move(sink), 0, {}};
}

void MockBackend::stop(const std::string& request_id) {
  std::lock_guard lock(mutex_);
  runs_.erase(request_id);
}

void MockBackend::tick(Millis now) {
  struct Pending {
    EventSink sink;
    std::string id;
    ResponseEvent event;
  };
  std::vector<Pending> out;
  std::vector<std::pair<SessionKey, std::string>> refs;
  {
    std::lock_guard lock(mutex_);
    for (auto it = runs_.begin(); it != runs_.end();) {
      Run& run = it->second;
      if (!run.rule) {
        out.push_back({run.sink, it->first, Failed{FailureKind::BackendUnavailable, "no scripted response", {}}});
        it = runs_.erase(it);
        continue;
      }
      const Millis elapsed = now - run.request.created;
      const Millis step = std::max<Millis>(1, run.rule->interval_ms);
      while (run.released < run.rule->deltas.size() &&
             static_cast<Millis>(run.released + 1) * step <= elapsed) {
        const std::string& delta = run.rule->deltas[run.released++];
        if (delta.empty()) continue;
        run.text += delta;
        out.push_back({run.sink, it->first, Chunk{run.text}});
      }
      const bool due = run.released == run.rule->deltas.size() &&
                       static_cast<Millis>(run.rule->deltas.size() + 1) * step <= elapsed;
      if (due && !run.rule->hang) {
        if (run.rule->fail)
          out.push_back({run.sink, it->first, Failed{*run.rule->fail, "scripted failure", run.text}});
        else
          out.push_back({run.sink, it->first, Done{run.text}});
        if (!run.rule->chat_ref.empty()) refs.emplace_back(run.request.session, run.rule->chat_ref);
        it = runs_.erase(it);
        continue;
      }
      ++it;
    }
  }
  for (auto& [key, ref] : refs) report_session_ref(key, ref);
  for (auto& p : out) p.sink(p.id, std::move(p.event));
}

// --- API stream decoding -----------------------------------------------------------

void ApiStreamDecoder::handle_line(std::string_view line, std::vector<ResponseEvent>& out) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  if (line.empty() || line.front() == ':') return;  // separator or SSE comment
  if (!line.starts_with("data:")) return;           // event:/id:/retry: fields are ignored
  line.remove_prefix(5);
  if (!line.empty() && line.front() == ' ') line.remove_prefix(1);
  if (line == "[DONE]") {
    finished_ = true;
    out.emplace_back(Done{text_});
    return;
  }
  nlohmann::json frame = nlohmann::json::parse(line, nullptr, false);
  if (frame.is_discarded() || !frame.is_object()) {
    finished_ = true;
    out.emplace_back(Failed{FailureKind::ProtocolError, "malformed frame: " + std::string(line.substr(0, 80)), text_});
    return;
  }
  if (frame.contains("error")) {
    finished_ = true;
    out.emplace_back(Failed{FailureKind::BackendUnavailable, frame["error"].dump(), text_});
    return;
  }
  const auto& choices = frame.contains("choices") ? frame["choices"] : nlohmann::json();
  if (!choices.is_array() || choices.empty() || !choices[0].is_object()) {
    finished_ = true;
    out.emplace_back(Failed{FailureKind::ProtocolError, "frame without choices", text_});
    return;
  }
  const auto& delta = choices[0].contains("delta") ? choices[0]["delta"] : nlohmann::json();
  if (delta.is_object() && delta.contains("content") && delta["content"].is_string()) {
    const auto& piece = delta["content"].get_ref<const std::string&>();
    if (!piece.empty()) {
      text_ += piece;
      out.emplace_back(Chunk{text_});
    }
  }
}

std::vector<ResponseEvent> ApiStreamDecoder::feed(std::string_view bytes) {
  std::vector<ResponseEvent> out;
  if (finished_) return out;
  buffer_.append(bytes);
  std::size_t start = 0;
  for (std::size_t nl = buffer_.find('\n'); nl != std::string::npos && !finished_; nl = buffer_.find('\n', start)) {
    handle_line(std::string_view(buffer_).substr(start, nl - start), out);
    start = nl + 1;
  }
  buffer_.erase(0, start);
  if (finished_) buffer_.clear();
  return out;
}

std::vector<ResponseEvent> ApiStreamDecoder::finish() {
  std::vector<ResponseEvent> out;
  if (finished_) return out;
  if (!buffer_.empty()) {
    std::string rest = std::move(buffer_);
    buffer_.clear();
    handle_line(rest, out);
    if (finished_) return out;
  }
  finished_ = true;
  out.emplace_back(Failed{FailureKind::ConnectionLost, "stream ended without completion marker", text_});
  return out;
}

std::vector<ResponseEvent> api_stream_decode(const std::vector<std::string>& wire_chunks, bool end_of_stream) {
  ApiStreamDecoder decoder;
  std::vector<ResponseEvent> out;
  for (const auto& c : wire_chunks) {
    auto events = decoder.feed(c);
    out.insert(out.end(), events.begin(), events.end());
  }
  if (end_of_stream) {
    auto events = decoder.finish();
    out.insert(out.end(), events.begin(), events.end());
  }
  return out;
}

// --- API backend -----------------------------------------------------------------

ApiBackend::ApiBackend(ApiConfig config) : config_(std::move(config)) {}

ApiBackend::~ApiBackend() {
  std::map<std::string, Worker> workers;
  {
    std::lock_guard lock(mutex_);
    workers.swap(workers_);
  }
  for (auto& [id, w] : workers) {
    w.thread.request_stop();
    std::static_pointer_cast<httplib::Client>(w.client)->stop();
  }
  // jthread joins on destruction.
}

std::string ApiBackend::request_body(const ApiConfig& config, const BackendRequest& request) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& e : request.history) {
    messages.push_back({{"role", "user"}, {"content", e.prompt}});
    messages.push_back({{"role", "assistant"}, {"content", e.response}});
  }
  messages.push_back({{"role", "user"}, {"content", request.prompt}});
  return nlohmann::json{{"model", config.model}, {"stream", true}, {"messages", std::move(messages)}}.dump();
}

void ApiBackend::reap() {
  for (auto it = workers_.begin(); it != workers_.end();) {
    if (it->second.done->load()) {
      it = workers_.erase(it);
    } else {
      ++it;
    }
  }
}

void ApiBackend::start(const BackendRequest& request, EventSink sink) {
  std::string body = request_body(config_, request);
  std::string token;
  if (const char* v = std::getenv(config_.key_env.c_str())) token = v;
  std::lock_guard lock(mutex_);
  reap();
  const std::string id = request.request_id;
  const ApiConfig& config = config_;
  auto done = std::make_shared<std::atomic<bool>>(false);
  auto client = std::make_shared<httplib::Client>(config.base_url);
  client->set_connection_timeout(std::chrono::seconds(5));
  client->set_read_timeout(std::chrono::milliseconds(config.read_timeout_ms));
  workers_[id] = Worker{done, client, std::jthread([id, client, done, body = std::move(body), token = std::move(token),
                                            sink = std::move(sink)](std::stop_token stop) {
    struct MarkDone {
      std::atomic<bool>& flag;
      ~MarkDone() { flag = true; }
    } mark{*done};
    httplib::Request req;
    req.method = "POST";
    req.path = "/v1/chat/completions";
    req.headers.emplace("Accept", "text/event-stream");
    if (!token.empty()) req.headers.emplace("Authorization", "Bearer " + token);
    req.headers.emplace("Content-Type", "application/json");
    req.body = body;

    int status = 0;
    std::string error_body;
    ApiStreamDecoder decoder;
    bool terminal = false;
    auto emit = [&](std::vector<ResponseEvent> events) {
      for (auto& e : events) {
        if (terminal || stop.stop_requested()) return;
        terminal = is_terminal(e);
        sink(id, std::move(e));
      }
    };
    req.response_handler = [&](const httplib::Response& r) {
      status = r.status;
      return !stop.stop_requested();
    };
    req.content_receiver = [&](const char* data, size_t n, uint64_t, uint64_t) {
      if (stop.stop_requested()) return false;
      if (status != 200) {
        error_body.append(data, n);
        return true;
      }
      emit(decoder.feed(std::string_view(data, n)));
      return !terminal;
    };

    auto result = client->send(req);
    if (stop.stop_requested() || terminal) return;
    if (status == 401 || status == 403) {
      emit({Failed{FailureKind::AuthFailed, "HTTP " + std::to_string(status) + " " + error_body, {}}});
    } else if (status != 0 && status != 200) {
      emit({Failed{FailureKind::BackendUnavailable, "HTTP " + std::to_string(status) + " " + error_body, {}}});
    } else if (status == 0) {
      emit({Failed{FailureKind::BackendUnavailable, httplib::to_string(result.error()), {}}});
    } else {
      emit(decoder.finish());
    }
  })};
}

void ApiBackend::stop(const std::string& request_id) {
  std::lock_guard lock(mutex_);
  if (auto it = workers_.find(request_id); it != workers_.end()) {
    it->second.thread.request_stop();
    std::static_pointer_cast<httplib::Client>(it->second.client)->stop();
  }
}

// --- relay backend ------------------------------------------------------------------

RelayBackend::RelayBackend(BridgeEndpoint& extension, const Clock& clock, QuiescenceRule rule, std::string home_url)
    : extension_(extension), clock_(clock), rule_(rule), home_url_(std::move(home_url)) {
  rule_.validate();
}

void RelayBackend::preload(const ChatSession& session) {
  if (extension_.closed() || !extension_.handshaken()) return;
  const bool resume = !session.backend_session_ref.empty();
  extension_.send(BridgeMessage::make(MessageType::OpenChat, {},
                                      {{"session_key", session.key.normalized()},
                                       {"chat_ref", session.backend_session_ref},
                                       {"url", resume ? session.backend_session_ref : home_url_},
                                       {"background", true}}));
}

void RelayBackend::start(const BackendRequest& request, EventSink sink) {
  if (extension_.closed() || !extension_.handshaken())
    throw Error(ErrorCode::BackendUnavailable, "browser extension is not connected");
  auto run = std::make_shared<Run>(Run{request, std::move(sink), QuiescenceTracker(rule_, clock_.now()), {}});
  {
    std::lock_guard lock(mutex_);
    runs_[request.request_id] = run;
  }
  const std::string id = request.request_id;
  try {
    run->bridge_id = extension_.request(
        BridgeMessage::make(MessageType::SubmitQuery, {},
                            {{"prompt", request.prompt},
                             {"chat_ref", request.backend_session_ref},
                             {"session_key", request.session.normalized()}}),
        [this, id](const BridgeMessage& reply) { on_reply(id, reply); });
  } catch (const Error& e) {
    std::lock_guard lock(mutex_);
    runs_.erase(id);
    throw Error(ErrorCode::BackendUnavailable, e.what());
  }
}

void RelayBackend::on_reply(const std::string& request_id, const BridgeMessage& reply) {
  std::shared_ptr<Run> run;
  std::optional<ResponseEvent> event;
  std::string chat_ref;
  {
    std::lock_guard lock(mutex_);
    auto it = runs_.find(request_id);
    if (it == runs_.end()) return;
    run = it->second;
    const auto kind = reply.kind();
    const std::string text = reply.body.value("text", run->tracker.content());
    if (kind == MessageType::ResponseChunk) {
      event = run->tracker.observe(text, clock_.now());
    } else if (kind == MessageType::ResponseDone) {
      event = Done{text};
      chat_ref = reply.body.value("chat_ref", "");
    } else if (kind == MessageType::ResponseFailed) {
      auto fk = parse_failure_kind(reply.body.value("kind", "BackendUnavailable"));
      event = Failed{fk.value_or(FailureKind::BackendUnavailable), reply.body.value("detail", ""), run->tracker.content()};
    } else if (kind == MessageType::RediscoveryFailed) {
      event = Failed{FailureKind::RediscoveryFailed, reply.body.value("detail", "page elements not found"),
                     run->tracker.content()};
    } else if (kind == MessageType::Error) {
      event = Failed{FailureKind::BackendUnavailable, reply.body.value("code", "") + ": " + reply.body.value("detail", ""),
                     run->tracker.content()};
    }
    if (event && is_terminal(*event)) runs_.erase(it);
  }
  if (!chat_ref.empty()) report_session_ref(run->request.session, chat_ref);
  if (event) run->sink(request_id, std::move(*event));
}

void RelayBackend::tick(Millis now) {
  std::vector<std::pair<std::shared_ptr<Run>, ResponseEvent>> out;
  {
    std::lock_guard lock(mutex_);
    for (auto it = runs_.begin(); it != runs_.end();) {
      if (auto e = it->second->tracker.poll(now)) {
        out.emplace_back(it->second, std::move(*e));
        it = runs_.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (auto& [run, e] : out) {
    if (!extension_.closed()) {
      try {
        extension_.send(BridgeMessage::make(MessageType::Cancel, {}, {{"request", run->bridge_id}}));
      } catch (const Error&) {
      }
    }
    run->sink(run->request.request_id, std::move(e));
  }
}

void RelayBackend::stop(const std::string& request_id) {
  std::shared_ptr<Run> run;
  {
    std::lock_guard lock(mutex_);
    auto it = runs_.find(request_id);
    if (it == runs_.end()) return;
    run = it->second;
    runs_.erase(it);
  }
  if (!extension_.closed()) {
    try {
      extension_.send(BridgeMessage::make(MessageType::Cancel, {}, {{"request", run->bridge_id}}));
    } catch (const Error&) {
    }
  }
}

}  // namespace hotprompt
