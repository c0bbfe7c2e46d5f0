#pragma once

#include <condition_variable>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "hotprompt/bridge.hpp"
#include "hotprompt/config.hpp"
#include "hotprompt/diff.hpp"
#include "hotprompt/focus.hpp"
#include "hotprompt/gateway.hpp"
#include "hotprompt/prompt.hpp"
#include "hotprompt/session_store.hpp"

namespace hotprompt {

// ---------------------------------------------------------------- states

struct IdleState {};

struct MenuOpenState {
  FocusContext focus;
  SelectionCapture selection;
  /// Capture failed; the menu is usable for plain queries only.
  bool capture_warning = false;
  std::string warning;
};

struct QueryPendingState {
  PromptRequest request;
  SessionKey session_key;
  std::string request_id;
};

struct PreviewingState {
  std::string original;
  std::string response;
  bool editable = false;
  bool error = false;
  std::string error_detail;
};

struct InsertingState {
  InsertMode mode = InsertMode::Replace;
};

struct DirectStreamingState {
  std::string request_id;
};

using InteractionState = std::variant<IdleState, MenuOpenState, QueryPendingState, PreviewingState,
                                      InsertingState, DirectStreamingState>;

enum class StateKind { Idle, MenuOpen, QueryPending, Previewing, Inserting, DirectStreaming };
inline constexpr std::size_t kStateKindCount = 6;

StateKind kind_of(const InteractionState& state) noexcept;
std::string_view to_string(StateKind kind) noexcept;
std::optional<StateKind> parse_state_kind(std::string_view name);

// ---------------------------------------------------------------- inputs

namespace action {
struct QuickAction {
  int slot = 1;
  /// Extra text typed before pressing the slot key.
  std::string extra;
};
struct SubmitQuery {
  std::string text;
  /// Modifier held at submit: stream straight into the target.
  bool direct = false;
};
struct AcceptInsert {
  /// Modifier held at TAB: append below instead of replacing.
  bool append = false;
};
struct Escape {};
/// User edits the query field while a preview is shown.
struct Retype {
  std::string query;
};
/// Stops direct streaming.
struct Cancel {};
}  // namespace action

using UserAction = std::variant<action::QuickAction, action::SubmitQuery, action::AcceptInsert, action::Escape,
                                action::Retype, action::Cancel>;

/// Everything the state machine reacts to, as classified by the transition table.
enum class InputKind {
  Trigger,
  QuickAction,
  Submit,
  SubmitDirect,
  Accept,
  AcceptAppend,
  Escape,
  Retype,
  Cancel,
  ResponseDone,
  ResponseFailed,
  InsertDone,
  InsertFailed,
};
inline constexpr std::size_t kInputKindCount = 13;

std::string_view to_string(InputKind kind) noexcept;
InputKind input_kind(const UserAction& action) noexcept;

/// Guard inputs evaluated by the table.
struct TransitionGuard {
  /// Target accepts text (drives TAB and direct submit).
  bool editable = true;
  /// Previewing has a non-empty response to insert.
  bool has_response = true;
};

/// The declared transition table. nullopt means the pair is illegal and the
/// state must stay unchanged.
std::optional<StateKind> declared_transition(StateKind from, InputKind input, TransitionGuard guard = {});

/// Popup wire form: {"action":"quick","slot":1} | {"action":"submit","text":..,"direct":bool} |
/// {"action":"accept","append":bool} | {"action":"escape"} | {"action":"retype","query":..} |
/// {"action":"cancel"}. Throws Error{ProtocolError}.
UserAction parse_user_action(const nlohmann::json& body);
nlohmann::json to_json(const UserAction& action);

// ---------------------------------------------------------------- service

/// Work items for the service's event loop.
struct TriggerEvent {};
struct BackendEvent {
  std::string request_id;
  ResponseEvent event;
};
struct InsertRequestedEvent {};
/// A backend learned the provider-side chat id for a session.
struct SessionRefEvent {
  SessionKey key;
  std::string ref;
};
struct ShutdownEvent {};
using ServiceEvent =
    std::variant<TriggerEvent, UserAction, BackendEvent, InsertRequestedEvent, SessionRefEvent, ShutdownEvent>;

/// Interaction state machine and orchestration between focus capture, prompt
/// building, the gateway and insertion. All methods run on the loop thread;
/// other threads hand work over through post().
class Service {
 public:
  Service(ServiceConfig config, FocusAdapter& adapter, LlmGateway& gateway, SessionStore& store,
          const Clock& clock);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Receives MenuOpen / ResponseChunk / MenuUpdate / MenuClose notifications.
  void set_ui_sink(std::function<void(const BridgeMessage&)> sink) { ui_sink_ = std::move(sink); }

  const InteractionState& state() const { return state_; }
  StateKind kind() const { return kind_of(state_); }

  /// Hotkey press. Throws Error{IllegalTransition} while busy.
  const InteractionState& handle_trigger();
  /// Throws Error{IllegalTransition} (state unchanged) or errors of the
  /// requested operation such as Error{EmptyQuery} / Error{UnknownSlot}.
  const InteractionState& dispatch(const UserAction& action);
  /// Previewing only; submits on the same session. Throws Error{EmptyQuery}.
  const InteractionState& refine_query(std::string new_query);
  /// Backend output for `request_id`; events for other requests are dropped.
  void on_backend_event(const std::string& request_id, const ResponseEvent& event);

  /// Thread-safe enqueue.
  void post(ServiceEvent event);
  /// Runs queued events. Returns the number handled. Errors from queued user
  /// actions are logged through the error hook and do not stop the loop.
  std::size_t pump();
  /// Blocks up to `timeout` for at least one event, then pumps.
  std::size_t wait_and_pump(std::chrono::milliseconds timeout);
  /// Advances simulated backends and timeouts, then pumps.
  void tick();
  bool shutdown_requested() const { return shutdown_; }

  void set_error_hook(std::function<void(const Error&)> hook) { error_hook_ = std::move(hook); }

  std::size_t insertions() const { return insertions_; }
  const std::optional<InsertionReport>& last_insertion() const { return last_insertion_; }
  /// Characters typed before the last direct-stream cancel, if any.
  std::optional<std::size_t> last_cancelled_typed() const { return cancelled_typed_; }
  const ServiceConfig& config() const { return config_; }
  const std::optional<PreviewModel>& preview() const { return preview_; }
  /// Query text carried over by Retype.
  const std::string& pending_query() const { return pending_query_; }

 private:
  void set_state(InteractionState next);
  void require(InputKind input, TransitionGuard guard = {});
  TransitionGuard guard() const;

  void on_quick_action(const action::QuickAction& a);
  void on_submit(const action::SubmitQuery& a);
  void on_accept(const action::AcceptInsert& a);
  void on_escape();
  void on_cancel();
  void on_insert_requested();
  void submit(PromptRequest request, bool direct);
  PromptRequest base_request() const;
  void finish_exchange(const std::string& response);
  void handle_event(ServiceEvent event);
  void send_ui(MessageType type, nlohmann::json body);
  nlohmann::json menu_update(bool busy) const;

  ServiceConfig config_;
  FocusAdapter& adapter_;
  LlmGateway& gateway_;
  SessionStore& store_;
  const Clock& clock_;

  InteractionState state_;
  // Interaction context kept across states until the next Idle.
  FocusContext focus_;
  SelectionCapture selection_;
  std::optional<SessionKey> session_key_;
  std::optional<PromptRequest> last_request_;
  std::string last_prompt_;
  std::string response_;
  std::string pending_query_;
  std::optional<PreviewModel> preview_;
  std::unique_ptr<TypedStreamer> streamer_;

  std::size_t insertions_ = 0;
  std::optional<InsertionReport> last_insertion_;
  std::optional<std::size_t> cancelled_typed_;

  std::function<void(const BridgeMessage&)> ui_sink_;
  std::function<void(const Error&)> error_hook_;

  std::mutex queue_mutex_;
  std::condition_variable queue_cv_;
  std::deque<ServiceEvent> queue_;
  bool shutdown_ = false;
};

}  // namespace hotprompt
