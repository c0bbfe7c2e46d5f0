#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "hotprompt/clock.hpp"
#include "hotprompt/response_event.hpp"
#include "hotprompt/session_store.hpp"

namespace hotprompt {

class BridgeEndpoint;
struct BridgeMessage;

struct QuiescenceRule {
  Millis window = 1000;
  Millis hard_timeout = 120000;

  /// Throws Error{ConfigInvalid} unless 0 < window < hard_timeout.
  void validate() const;
};

/// Decides when a polled response has settled. Content is the full text seen
/// so far; repeats of the same content do not count as changes. Quiescence is
/// only declared once some content has arrived.
class QuiescenceTracker {
 public:
  QuiescenceTracker(QuiescenceRule rule, Millis started);

  /// Chunk when `content` differs from the last observation.
  std::optional<ResponseEvent> observe(std::string content, Millis now);
  /// Done once `window` has passed since the last change, Failed{HardTimeout}
  /// once `hard_timeout` has passed since start.
  std::optional<ResponseEvent> poll(Millis now);

  bool finished() const { return finished_; }
  const std::string& content() const { return content_; }
  Millis last_change() const { return last_change_; }

 private:
  QuiescenceRule rule_;
  Millis started_;
  Millis last_change_ = 0;
  std::string content_;
  bool seen_content_ = false;
  bool finished_ = false;
};

struct BackendRequest {
  std::string request_id;
  SessionKey session;
  std::string backend_session_ref;
  /// Earlier exchanges of this session, oldest first.
  std::vector<Exchange> history;
  std::string prompt;
  Millis created = 0;
};

using EventSink = std::function<void(const std::string& request_id, ResponseEvent event)>;

/// One LLM access path. Implementations may emit events from any thread.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual std::string_view name() const = 0;
  /// Best effort; failures surface at submit.
  virtual void preload(const ChatSession& session) = 0;
  /// Throws Error{BackendUnavailable} if the request cannot be started.
  virtual void start(const BackendRequest& request, EventSink sink) = 0;
  /// Abort without emitting anything further.
  virtual void stop(const std::string& request_id) = 0;
  /// Simulated-clock hook for backends that time their own output.
  virtual void tick(Millis /*now*/) {}
  /// Called when a backend learns the provider-side chat id for a session.
  void on_session_ref(std::function<void(const SessionKey&, std::string)> cb) { session_ref_cb_ = std::move(cb); }

 protected:
  void report_session_ref(const SessionKey& key, std::string ref) {
    if (session_ref_cb_) session_ref_cb_(key, std::move(ref));
  }

 private:
  std::function<void(const SessionKey&, std::string)> session_ref_cb_;
};

/// Uniform front over a Backend: request ids, one in-flight request per
/// session, cancellation, the hard timeout, and the stream grammar
/// (Chunk)* terminal with nothing after the terminal event.
class LlmGateway {
 public:
  LlmGateway(std::unique_ptr<Backend> backend, const Clock& clock, QuiescenceRule rule = {});
  ~LlmGateway();

  void set_sink(EventSink sink);

  /// Throws Error{Busy} or Error{BackendUnavailable}. Returns the request id.
  std::string submit(const ChatSession& session, std::string prompt);
  void preload(const ChatSession& session);
  /// Emits exactly one Failed{Cancelled}. Throws Error{UnknownRequest}.
  void cancel(const std::string& request_id);
  /// Drives simulated backends and enforces the hard timeout.
  void tick(Millis now);

  bool in_flight(const std::string& request_id) const;
  std::size_t in_flight_count() const;
  Backend& backend() { return *backend_; }
  const QuiescenceRule& rule() const { return rule_; }

 private:
  void deliver(const std::string& request_id, ResponseEvent event);

  std::unique_ptr<Backend> backend_;
  const Clock& clock_;
  QuiescenceRule rule_;
  EventSink sink_;
  mutable std::recursive_mutex mutex_;
  struct Flight {
    std::string session;
    Millis created = 0;
    std::string last_text;
  };
  std::map<std::string, Flight> flights_;
  std::uint64_t counter_ = 0;
};

// ---------------------------------------------------------------------------

/// Scripted response used by the mock backend and the bundled mock server.
struct ScenarioRule {
  /// Substring the prompt must contain; empty matches everything.
  std::string match;
  /// Incremental pieces; the full text is their concatenation.
  std::vector<std::string> deltas;
  Millis interval_ms = 20;
  /// Fail instead of finishing (after any deltas).
  std::optional<FailureKind> fail;
  /// HTTP status for the mock server; non-200 ends the exchange immediately.
  int status = 200;
  /// Mock server: close the connection after this many deltas.
  std::optional<std::size_t> drop_after;
  /// Mock server: send an unparsable frame after this many deltas.
  std::optional<std::size_t> malformed_after;
  /// Never finish (exercises the hard timeout).
  bool hang = false;
  /// Provider-side chat id reported back for the session.
  std::string chat_ref;
};

/// JSON scenario file: {"responses": [{"match": "...", "deltas": [...] | "chunks": [...],
/// "interval_ms": 20, "fail": "AuthFailed", "status": 200, "drop_after": 1,
/// "malformed_after": 1, "hang": false, "chat_ref": "..."}]}. "chunks" lists
/// full-content snapshots and is converted to deltas.
struct Scenario {
  std::vector<ScenarioRule> responses;

  static Scenario parse(std::string_view json);
  static Scenario load(const std::string& path);
  /// First rule whose match is contained in `prompt`.
  const ScenarioRule* find(std::string_view prompt) const;
};

std::optional<FailureKind> parse_failure_kind(std::string_view name);

/// Deterministic backend driven by tick(): delta i of a rule is released
/// (i + 1) * interval_ms after start, the terminal one interval later.
class MockBackend final : public Backend {
 public:
  explicit MockBackend(Scenario scenario, const Clock& clock);

  std::string_view name() const override { return "mock"; }
  void preload(const ChatSession& session) override;
  void start(const BackendRequest& request, EventSink sink) override;
  void stop(const std::string& request_id) override;
  void tick(Millis now) override;

  std::size_t preload_count() const { return preloads_; }
  const std::vector<BackendRequest>& requests() const { return seen_; }

 private:
  struct Run {
    BackendRequest request;
    const ScenarioRule* rule = nullptr;
    EventSink sink;
    std::size_t released = 0;
    std::string text;
  };
  Scenario scenario_;
  const Clock& clock_;
  std::mutex mutex_;
  std::map<std::string, Run> runs_;
  std::vector<BackendRequest> seen_;
  std::size_t preloads_ = 0;
};

/// Incremental decoder for the streamed chat-completions wire format:
/// "data: {json}" lines separated by blank lines, ending with "data: [DONE]".
/// Each delta is folded into a full-content Chunk.
class ApiStreamDecoder {
 public:
  std::vector<ResponseEvent> feed(std::string_view bytes);
  /// End of input. Without a [DONE] marker this is Failed{ConnectionLost}.
  std::vector<ResponseEvent> finish();

  bool finished() const { return finished_; }
  const std::string& text() const { return text_; }

 private:
  void handle_line(std::string_view line, std::vector<ResponseEvent>& out);

  std::string buffer_;
  std::string text_;
  bool finished_ = false;
};

/// Decodes a complete recorded stream delivered in the given pieces.
std::vector<ResponseEvent> api_stream_decode(const std::vector<std::string>& wire_chunks, bool end_of_stream = true);

struct ApiConfig {
  std::string base_url = "http://127.0.0.1:8089";
  std::string model = "mock-model";
  /// Name of the environment variable holding the bearer token.
  std::string key_env = "HOTPROMPT_API_KEY";
  Millis read_timeout_ms = 120000;
};

/// Direct provider API over HTTP; one worker thread per request.
class ApiBackend final : public Backend {
 public:
  explicit ApiBackend(ApiConfig config);
  ~ApiBackend() override;

  std::string_view name() const override { return "api"; }
  void preload(const ChatSession&) override {}
  void start(const BackendRequest& request, EventSink sink) override;
  void stop(const std::string& request_id) override;

  /// JSON body sent for a request (history as alternating user/assistant messages).
  static std::string request_body(const ApiConfig& config, const BackendRequest& request);

 private:
  void reap();

  ApiConfig config_;
  std::mutex mutex_;
  struct Worker {
    std::shared_ptr<std::atomic<bool>> done;
    std::shared_ptr<void> client;
    std::jthread thread;
  };
  std::map<std::string, Worker> workers_;
};

/// Drives a provider's web chat through the browser extension. The extension
/// forwards the output element's full text on every change; the service also
/// applies its own quiescence rule so a silent extension still terminates.
class RelayBackend final : public Backend {
 public:
  RelayBackend(BridgeEndpoint& extension, const Clock& clock, QuiescenceRule rule,
               std::string home_url = "https://chat.example.invalid/");

  std::string_view name() const override { return "relay"; }
  void preload(const ChatSession& session) override;
  void start(const BackendRequest& request, EventSink sink) override;
  void stop(const std::string& request_id) override;
  void tick(Millis now) override;

 private:
  struct Run {
    BackendRequest request;
    EventSink sink;
    QuiescenceTracker tracker;
    std::string bridge_id;
  };
  void on_reply(const std::string& request_id, const BridgeMessage& reply);

  BridgeEndpoint& extension_;
  const Clock& clock_;
  QuiescenceRule rule_;
  std::string home_url_;
  std::recursive_mutex mutex_;
  std::map<std::string, std::shared_ptr<Run>> runs_;
};

}  // namespace hotprompt
