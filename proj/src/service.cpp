#include "hotprompt/service.hpp"

#include <array>

#include "hotprompt/error.hpp"

namespace hotprompt {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

using S = StateKind;
using I = InputKind;

enum class Guard { None, Editable, Insertable };

struct Row {
  S from;
  I input;
  S to;
  Guard guard = Guard::None;
};

// Every legal (state, input) pair. Anything not listed is illegal.
constexpr std::array kTable{
    Row{S::Idle, I::Trigger, S::MenuOpen},
    Row{S::Idle, I::Escape, S::Idle},

    Row{S::MenuOpen, I::Trigger, S::MenuOpen},
    Row{S::MenuOpen, I::QuickAction, S::QueryPending},
    Row{S::MenuOpen, I::Submit, S::QueryPending},
    Row{S::MenuOpen, I::SubmitDirect, S::DirectStreaming, Guard::Editable},
    Row{S::MenuOpen, I::Escape, S::Idle},

    Row{S::QueryPending, I::Escape, S::Idle},
    Row{S::QueryPending, I::ResponseDone, S::Previewing},
    Row{S::QueryPending, I::ResponseFailed, S::Previewing},

    Row{S::Previewing, I::QuickAction, S::QueryPending},
    Row{S::Previewing, I::Submit, S::QueryPending},
    Row{S::Previewing, I::SubmitDirect, S::DirectStreaming, Guard::Editable},
    Row{S::Previewing, I::Accept, S::Inserting, Guard::Insertable},
    Row{S::Previewing, I::AcceptAppend, S::Inserting, Guard::Insertable},
    Row{S::Previewing, I::Retype, S::Previewing},
    Row{S::Previewing, I::Escape, S::Idle},

    Row{S::Inserting, I::InsertDone, S::Idle},
    Row{S::Inserting, I::InsertFailed, S::Previewing},
    Row{S::Inserting, I::Escape, S::Idle},

    Row{S::DirectStreaming, I::Cancel, S::Idle},
    Row{S::DirectStreaming, I::ResponseDone, S::Idle},
    Row{S::DirectStreaming, I::ResponseFailed, S::Idle},
};

std::string query_of(const nlohmann::json& body, const char* key) {
  auto it = body.find(key);
  if (it == body.end()) return {};
  if (!it->is_string()) throw Error(ErrorCode::ProtocolError, std::string("user action: '") + key + "' must be a string");
  return it->get<std::string>();
}

bool flag_of(const nlohmann::json& body, const char* key) {
  auto it = body.find(key);
  if (it == body.end()) return false;
  if (!it->is_boolean()) throw Error(ErrorCode::ProtocolError, std::string("user action: '") + key + "' must be a boolean");
  return it->get<bool>();
}

}  // namespace

StateKind kind_of(const InteractionState& state) noexcept { return static_cast<StateKind>(state.index()); }

std::string_view to_string(StateKind kind) noexcept {
  switch (kind) {
    case S::Idle: return "Idle";
    case S::MenuOpen: return "MenuOpen";
    case S::QueryPending: return "QueryPending";
    case S::Previewing: return "Previewing";
    case S::Inserting: return "Inserting";
    case S::DirectStreaming: return "DirectStreaming";
  }
  return "?";
}

std::optional<StateKind> parse_state_kind(std::string_view name) {
  for (std::size_t i = 0; i < kStateKindCount; ++i)
    if (to_string(static_cast<S>(i)) == name) return static_cast<S>(i);
  return std::nullopt;
}

std::string_view to_string(InputKind kind) noexcept {
  switch (kind) {
    case I::Trigger: return "Trigger";
    case I::QuickAction: return "QuickAction";
    case I::Submit: return "Submit";
    case I::SubmitDirect: return "SubmitDirect";
    case I::Accept: return "Accept";
    case I::AcceptAppend: return "AcceptAppend";
    case I::Escape: return "Escape";
    case I::Retype: return "Retype";
    case I::Cancel: return "Cancel";
    case I::ResponseDone: return "ResponseDone";
    case I::ResponseFailed: return "ResponseFailed";
    case I::InsertDone: return "InsertDone";
    case I::InsertFailed: return "InsertFailed";
  }
  return "?";
}

InputKind input_kind(const UserAction& a) noexcept {
  return std::visit(overloaded{
                        [](const action::QuickAction&) { return I::QuickAction; },
                        [](const action::SubmitQuery& s) { return s.direct ? I::SubmitDirect : I::Submit; },
                        [](const action::AcceptInsert& s) { return s.append ? I::AcceptAppend : I::Accept; },
                        [](const action::Escape&) { return I::Escape; },
                        [](const action::Retype&) { return I::Retype; },
                        [](const action::Cancel&) { return I::Cancel; },
                    },
                    a);
}

std::optional<StateKind> declared_transition(StateKind from, InputKind input, TransitionGuard guard) {
  for (const auto& row : kTable) {
    if (row.from != from || row.input != input) continue;
    if (row.guard == Guard::Editable && !guard.editable) return std::nullopt;
    if (row.guard == Guard::Insertable && !(guard.editable && guard.has_response)) return std::nullopt;
    return row.to;
  }
  return std::nullopt;
}

UserAction parse_user_action(const nlohmann::json& body) {
  if (!body.is_object()) throw Error(ErrorCode::ProtocolError, "user action must be an object");
  const std::string name = query_of(body, "action");
  if (name == "quick") {
    auto it = body.find("slot");
    if (it == body.end() || !it->is_number_integer())
      throw Error(ErrorCode::ProtocolError, "user action: quick needs an integer slot");
    return action::QuickAction{it->get<int>(), query_of(body, "text")};
  }
  if (name == "submit") return action::SubmitQuery{query_of(body, "text"), flag_of(body, "direct")};
  if (name == "accept") return action::AcceptInsert{flag_of(body, "append")};
  if (name == "escape") return action::Escape{};
  if (name == "retype") return action::Retype{query_of(body, "query")};
  if (name == "cancel") return action::Cancel{};
  throw Error(ErrorCode::ProtocolError, "unknown user action '" + name + "'");
}

nlohmann::json to_json(const UserAction& a) {
  return std::visit(overloaded{
                        [](const action::QuickAction& q) {
                          nlohmann::json j{{"action", "quick"}, {"slot", q.slot}};
                          if (!q.extra.empty()) j["text"] = q.extra;
                          return j;
                        },
                        [](const action::SubmitQuery& s) {
                          return nlohmann::json{{"action", "submit"}, {"text", s.text}, {"direct", s.direct}};
                        },
                        [](const action::AcceptInsert& s) {
                          return nlohmann::json{{"action", "accept"}, {"append", s.append}};
                        },
                        [](const action::Escape&) { return nlohmann::json{{"action", "escape"}}; },
                        [](const action::Retype& r) { return nlohmann::json{{"action", "retype"}, {"query", r.query}}; },
                        [](const action::Cancel&) { return nlohmann::json{{"action", "cancel"}}; },
                    },
                    a);
}

// ---------------------------------------------------------------------------

Service::Service(ServiceConfig config, FocusAdapter& adapter, LlmGateway& gateway, SessionStore& store,
                 const Clock& clock)
    : config_(std::move(config)), adapter_(adapter), gateway_(gateway), store_(store), clock_(clock) {
  config_.validate();
  gateway_.set_sink([this](const std::string& id, ResponseEvent ev) { post(BackendEvent{id, std::move(ev)}); });
  gateway_.backend().on_session_ref(
      [this](const SessionKey& key, std::string ref) { post(SessionRefEvent{key, std::move(ref)}); });
}

Service::~Service() {
  gateway_.set_sink(nullptr);
  gateway_.backend().on_session_ref(nullptr);
}

void Service::set_state(InteractionState next) {
  state_ = std::move(next);
  if (std::holds_alternative<IdleState>(state_)) {
    session_key_.reset();
    last_request_.reset();
    last_prompt_.clear();
    response_.clear();
    pending_query_.clear();
    preview_.reset();
    streamer_.reset();
  }
}

TransitionGuard Service::guard() const {
  return {focus_.editable, !response_.empty()};
}

void Service::require(InputKind input, TransitionGuard g) {
  if (!declared_transition(kind(), input, g))
    throw Error(ErrorCode::IllegalTransition,
                std::string(to_string(input)) + " is not allowed in " + std::string(to_string(kind())));
}

void Service::send_ui(MessageType type, nlohmann::json body) {
  if (ui_sink_) ui_sink_(BridgeMessage::make(type, "", std::move(body)));
}

nlohmann::json Service::menu_update(bool busy) const {
  nlohmann::json runs = nlohmann::json::array();
  if (preview_)
    for (const auto& r : preview_->runs) runs.push_back({{"style", to_string(r.style)}, {"text", r.text}});
  nlohmann::json body{{"state", to_string(kind())}, {"busy", busy},         {"runs", runs},
                      {"response", response_},      {"tab_visible", focus_.editable}};
  if (const auto* p = std::get_if<PreviewingState>(&state_)) {
    body["error"] = p->error;
    if (p->error) body["error_detail"] = p->error_detail;
  } else {
    body["error"] = false;
  }
  return body;
}

const InteractionState& Service::handle_trigger() {
  require(I::Trigger);
  const bool refresh = kind() == S::MenuOpen;
  MenuOpenState menu;
  try {
    menu.focus = adapter_.capture_focus();
    menu.selection = adapter_.extract_selection(menu.focus, config_.include_context);
    menu.focus.editable = adapter_.is_editable(menu.focus);
  } catch (const Error& e) {
    // Degrade to a query-only menu.
    menu.selection = SelectionCapture{};
    menu.focus.editable = false;
    menu.capture_warning = true;
    menu.warning = e.what();
  }
  focus_ = menu.focus;
  selection_ = menu.selection;
  session_key_ = SessionKey(focus_.app_name, focus_.window_title);
  response_.clear();
  preview_.reset();

  if (!menu.capture_warning) {
    ChatSession session;
    if (auto found = store_.find(*session_key_)) session = *found;
    else session.key = *session_key_;
    gateway_.preload(session);
  }

  nlohmann::json actions = nlohmann::json::array();
  for (const auto& a : config_.quick_actions.actions()) actions.push_back({{"slot", a.slot}, {"label", a.label}});
  nlohmann::json body{{"app", focus_.app_name},
                      {"title", focus_.window_title},
                      {"selection", selection_.selected_text},
                      {"tab_visible", focus_.editable},
                      {"quick_actions", actions},
                      {"refresh", refresh}};
  if (menu.capture_warning) body["warning"] = menu.warning;
  set_state(std::move(menu));
  send_ui(MessageType::MenuOpen, std::move(body));
  return state_;
}

PromptRequest Service::base_request() const {
  PromptRequest req;
  req.selection = selection_.selected_text;
  req.app_name = focus_.app_name;
  req.window_title = focus_.window_title;
  if (config_.include_context && selection_.surrounding_text) {
    std::optional<std::size_t> offset = selection_.context_disjoint ? std::nullopt : selection_.selection_offset;
    req.context = cap_context(*selection_.surrounding_text, config_.context_limit, offset,
                              selection_.selected_text.size());
  }
  return req;
}

void Service::submit(PromptRequest request, bool direct) {
  const std::string prompt = build_prompt(request, config_.quick_actions);  // EmptyQuery / UnknownSlot
  if (!session_key_) session_key_ = SessionKey(focus_.app_name, focus_.window_title);
  auto [session, created] = store_.lookup_or_create(*session_key_, clock_.now());
  (void)created;

  std::string id;
  try {
    id = gateway_.submit(session, prompt);
  } catch (const Error& e) {
    if (auto* p = std::get_if<PreviewingState>(&state_)) {
      p->error = true;
      p->error_detail = e.what();
      send_ui(MessageType::MenuUpdate, menu_update(false));
    } else if (auto* m = std::get_if<MenuOpenState>(&state_)) {
      m->warning = e.what();
      send_ui(MessageType::MenuUpdate, {{"state", "MenuOpen"}, {"busy", false}, {"error", true}, {"error_detail", e.what()}});
    }
    throw;
  }
  last_request_ = request;
  last_prompt_ = prompt;
  pending_query_.clear();

  if (direct) {
    streamer_ = std::make_unique<TypedStreamer>(adapter_, focus_);
    set_state(DirectStreamingState{id});
    send_ui(MessageType::MenuClose, {{"reason", "direct"}});
  } else {
    preview_ = plain_preview("");
    set_state(QueryPendingState{std::move(request), *session_key_, id});
    send_ui(MessageType::MenuUpdate, menu_update(true));
  }
}

void Service::on_quick_action(const action::QuickAction& a) {
  require(I::QuickAction);
  PromptRequest req = base_request();
  req.quick_slot = a.slot;
  req.user_query = a.extra;
  if (!config_.quick_actions.contains(a.slot))
    throw Error(ErrorCode::UnknownSlot, "no quick action in slot " + std::to_string(a.slot));
  submit(std::move(req), false);
}

void Service::on_submit(const action::SubmitQuery& a) {
  require(a.direct ? I::SubmitDirect : I::Submit, guard());
  std::string text = a.text;
  if (text.empty() && kind() == S::Previewing) text = pending_query_;
  PromptRequest req = base_request();
  req.user_query = std::move(text);
  effective_query(req, config_.quick_actions);  // throws EmptyQuery before anything changes
  submit(std::move(req), a.direct);
}

const InteractionState& Service::refine_query(std::string new_query) {
  if (kind() != S::Previewing)
    throw Error(ErrorCode::IllegalTransition, "refine requires Previewing, not " + std::string(to_string(kind())));
  on_submit(action::SubmitQuery{std::move(new_query), false});
  return state_;
}

void Service::on_accept(const action::AcceptInsert& a) {
  require(a.append ? I::AcceptAppend : I::Accept, guard());
  set_state(InsertingState{a.append ? InsertMode::AppendBelow : InsertMode::Replace});
  post(InsertRequestedEvent{});
}

void Service::on_insert_requested() {
  auto* ins = std::get_if<InsertingState>(&state_);
  if (!ins) return;  // escaped before the insertion ran
  try {
    last_insertion_ = adapter_.insert_response(focus_, response_, ins->mode);
  } catch (const Error& e) {
    PreviewingState p{selection_.selected_text, response_, focus_.editable, true, e.what()};
    set_state(std::move(p));
    send_ui(MessageType::MenuUpdate, menu_update(false));
    throw;
  }
  ++insertions_;
  set_state(IdleState{});
  send_ui(MessageType::MenuClose, {{"reason", "inserted"}});
}

void Service::on_escape() {
  require(I::Escape);
  if (auto* q = std::get_if<QueryPendingState>(&state_)) {
    try {
      gateway_.cancel(q->request_id);
    } catch (const Error&) {
      // Already finished; its events are dropped once we leave QueryPending.
    }
  }
  const bool was_idle = kind() == S::Idle;
  set_state(IdleState{});
  if (!was_idle) send_ui(MessageType::MenuClose, {{"reason", "escape"}});
}

void Service::on_cancel() {
  require(I::Cancel);
  auto& d = std::get<DirectStreamingState>(state_);
  if (streamer_) {
    streamer_->cancel();
    cancelled_typed_ = streamer_->typed_chars();
  }
  try {
    gateway_.cancel(d.request_id);
  } catch (const Error&) {
  }
  set_state(IdleState{});
}

void Service::finish_exchange(const std::string& response) {
  if (session_key_) store_.append_exchange(*session_key_, last_prompt_, response, clock_.now());
  if (config_.session_ttl_ms > 0) store_.evict(clock_.now() - config_.session_ttl_ms);
}

void Service::on_backend_event(const std::string& request_id, const ResponseEvent& event) {
  if (auto* q = std::get_if<QueryPendingState>(&state_)) {
    if (q->request_id != request_id) return;
    if (const auto* c = std::get_if<Chunk>(&event)) {
      preview_ = plain_preview(c->accumulated_text);
      send_ui(MessageType::ResponseChunk, {{"text", c->accumulated_text}});
      return;
    }
    auto diffed = [this] {
      if (selection_.selected_text.empty()) return plain_preview(response_);
      return render_preview(word_diff(selection_.selected_text, response_, DiffOptions{config_.diff_granularity}));
    };
    if (const auto* d = std::get_if<Done>(&event)) {
      response_ = d->final_text;
      finish_exchange(response_);
      preview_ = diffed();
      set_state(PreviewingState{selection_.selected_text, response_, focus_.editable, false, {}});
    } else {
      // The previous preview (if any) stays on screen under an error banner.
      preview_ = diffed();
      set_state(PreviewingState{selection_.selected_text, response_, focus_.editable, true, describe(event)});
    }
    send_ui(MessageType::MenuUpdate, menu_update(false));
    return;
  }

  if (auto* d = std::get_if<DirectStreamingState>(&state_)) {
    if (d->request_id != request_id || !streamer_) return;
    try {
      const bool terminal = streamer_->feed(event);
      if (!terminal) return;
      if (const auto* done = std::get_if<Done>(&event)) {
        finish_exchange(done->final_text);
        last_insertion_ = streamer_->report();
        ++insertions_;
      }
    } catch (const Error& e) {
      set_state(IdleState{});
      throw;
    }
    set_state(IdleState{});
  }
}

void Service::post(ServiceEvent event) {
  {
    std::lock_guard lock(queue_mutex_);
    queue_.push_back(std::move(event));
  }
  queue_cv_.notify_all();
}

void Service::handle_event(ServiceEvent event) {
  std::visit(overloaded{
                 [this](TriggerEvent) { handle_trigger(); },
                 [this](const UserAction& a) { dispatch(a); },
                 [this](const BackendEvent& b) { on_backend_event(b.request_id, b.event); },
                 [this](InsertRequestedEvent) { on_insert_requested(); },
                 [this](const SessionRefEvent& r) {
                   if (store_.find(r.key)) store_.set_backend_ref(r.key, r.ref);
                 },
                 [this](ShutdownEvent) { shutdown_ = true; },
             },
             event);
}

std::size_t Service::pump() {
  std::size_t handled = 0;
  for (;;) {
    ServiceEvent ev;
    {
      std::lock_guard lock(queue_mutex_);
      if (queue_.empty()) break;
      ev = std::move(queue_.front());
      queue_.pop_front();
    }
    ++handled;
    try {
      handle_event(std::move(ev));
    } catch (const Error& e) {
      if (error_hook_) error_hook_(e);
    }
  }
  return handled;
}

std::size_t Service::wait_and_pump(std::chrono::milliseconds timeout) {
  {
    std::unique_lock lock(queue_mutex_);
    queue_cv_.wait_for(lock, timeout, [this] { return !queue_.empty(); });
  }
  return pump();
}

void Service::tick() {
  gateway_.tick(clock_.now());
  pump();
}

const InteractionState& Service::dispatch(const UserAction& a) {
  std::visit(overloaded{
                 [this](const action::QuickAction& q) { on_quick_action(q); },
                 [this](const action::SubmitQuery& s) { on_submit(s); },
                 [this](const action::AcceptInsert& s) { on_accept(s); },
                 [this](const action::Escape&) { on_escape(); },
                 [this](const action::Retype& r) {
                   require(I::Retype);
                   pending_query_ = r.query;
                 },
                 [this](const action::Cancel&) { on_cancel(); },
             },
             a);
  return state_;
}

}  // namespace hotprompt
