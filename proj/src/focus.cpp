#include "hotprompt/focus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <future>
#include <nlohmann/json.hpp>
#include <sstream>

#include "hotprompt/bridge.hpp"
#include "hotprompt/utf8.hpp"

namespace hotprompt {
namespace {

using Path = std::vector<std::size_t>;

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

template <typename Pred>
std::optional<Path> find_dfs(const DocNode& node, Path path, const Pred& pred) {
  if (pred(node)) return path;
  for (std::size_t i = 0; i < node.children.size(); ++i) {
    path.push_back(i);
    if (auto found = find_dfs(node.children[i], path, pred)) return found;
    path.pop_back();
  }
  return std::nullopt;
}

bool accepts_typing(const DocNode& node) {
  return (node.editable || node.contenteditable) && !node.readonly && !node.disabled;
}

// --- fixture lexing -------------------------------------------------------

std::string read_json_string(std::string_view line, std::size_t& pos) {
  if (pos >= line.size() || line[pos] != '"') throw Error(ErrorCode::AdapterFailure, "expected string literal");
  std::size_t end = pos + 1;
  while (end < line.size() && line[end] != '"') end += (line[end] == '\\') ? 2 : 1;
  if (end >= line.size()) throw Error(ErrorCode::AdapterFailure, "unterminated string literal");
  try {
    std::string value = nlohmann::json::parse(line.substr(pos, end - pos + 1)).get<std::string>();
    pos = end + 1;
    return value;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::AdapterFailure, std::string("bad string literal: ") + e.what());
  }
}

struct Token {
  std::string key;
  std::string value;
  bool has_value = false;
};

std::vector<Token> lex(std::string_view line) {
  std::vector<Token> tokens;
  std::size_t pos = 0;
  while (pos < line.size()) {
    if (line[pos] == ' ' || line[pos] == '\t') {
      ++pos;
      continue;
    }
    Token t;
    if (line[pos] == '"') {
      t.key = read_json_string(line, pos);
      tokens.push_back(std::move(t));
      continue;
    }
    std::size_t start = pos;
    while (pos < line.size() && line[pos] != ' ' && line[pos] != '\t' && line[pos] != '=') ++pos;
    t.key = std::string(line.substr(start, pos - start));
    if (pos < line.size() && line[pos] == '=') {
      ++pos;
      t.has_value = true;
      if (pos < line.size() && line[pos] == '"') {
        t.value = read_json_string(line, pos);
      } else {
        start = pos;
        while (pos < line.size() && line[pos] != ' ' && line[pos] != '\t') ++pos;
        t.value = std::string(line.substr(start, pos - start));
      }
    }
    tokens.push_back(std::move(t));
  }
  return tokens;
}

std::string quote(std::string_view s) {
  return nlohmann::json(std::string(s)).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

void serialize_node(std::ostringstream& out, const DocNode& n, int depth) {
  out << std::string(static_cast<std::size_t>(depth) * 2, ' ') << "node " << n.role;
  if (n.editable) out << " editable";
  if (n.readonly) out << " readonly";
  if (n.disabled) out << " disabled";
  if (n.contenteditable) out << " contenteditable";
  if (n.focused) out << " focus";
  if (n.caret) out << " caret";
  if (n.text_pattern) out << (*n.text_pattern ? " textpattern" : " notextpattern");
  if (!n.name.empty()) out << " name=" << quote(n.name);
  if (!n.text.empty()) out << " text=" << quote(n.text);
  if (n.sel_start != 0 || n.sel_end != 0) out << " sel=" << n.sel_start << ',' << n.sel_end;
  out << '\n';
  for (const auto& c : n.children) serialize_node(out, c, depth + 1);
}

std::size_t next_cp(std::string_view text, std::size_t pos) {
  if (pos >= text.size()) return text.size();
  return std::min(text.size(), pos + utf8::sequence_length(static_cast<unsigned char>(text[pos])));
}

}  // namespace

std::string_view to_string(AdapterId id) noexcept { return id == AdapterId::Web ? "web" : "native"; }

std::string_view to_string(CaptureMethod method) noexcept {
  switch (method) {
    case CaptureMethod::Accessibility: return "accessibility";
    case CaptureMethod::ClipboardFallback: return "clipboard-fallback";
    case CaptureMethod::Extension: return "extension";
  }
  return "accessibility";
}

std::string_view to_string(InsertMode mode) noexcept {
  switch (mode) {
    case InsertMode::Replace: return "replace";
    case InsertMode::AppendBelow: return "append";
    case InsertMode::DirectStream: return "stream";
  }
  return "replace";
}

std::string Key::describe() const {
  switch (code) {
    case Code::Char: return text;
    case Code::Right: return "<Right>";
    case Code::SelectAll: return "<Ctrl+A>";
    case Code::Copy: return "<Ctrl+C>";
    case Code::Paste: return "<Ctrl+V>";
    case Code::Undo: return "<Ctrl+Z>";
    case Code::SelectToStart: return "<Shift+Ctrl+Home>";
  }
  return "?";
}

// --- rule tables ------------------------------------------------------------

bool has_text_pattern(const DocNode& node) {
  if (node.text_pattern) return *node.text_pattern;
  const std::string role = lower(node.role);
  return role == "edit" || role == "document" || role == "text";
}

bool editable_by_rules(AdapterId adapter, const DocNode& node) {
  const std::string role = lower(node.role);
  if (adapter == AdapterId::Web) {
    if (node.contenteditable) return !node.disabled;
    if (role == "input" || role == "textarea") return !node.readonly && !node.disabled;
    return false;
  }
  if (role == "edit" || role == "document") return node.editable && !node.readonly && !node.disabled;
  return false;
}

bool is_browser_app(std::string_view app_name) {
  static constexpr std::array kBrowsers{"chrome", "msedge", "firefox", "brave", "opera", "chromium", "vivaldi"};
  std::string name = lower(app_name);
  if (name.size() > 4 && name.ends_with(".exe")) name.resize(name.size() - 4);
  return std::find(kBrowsers.begin(), kBrowsers.end(), name) != kBrowsers.end();
}

// --- SimulatedDocument ------------------------------------------------------

SimulatedDocument SimulatedDocument::parse(std::string_view fixture) {
  SimulatedDocument doc;
  bool header = false;
  bool have_root = false;
  std::vector<DocNode*> stack;  // stack[d] = last node at depth d
  std::istringstream in{std::string(fixture)};
  std::string raw;
  int line_no = 0;
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::AdapterFailure, "fixture line " + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    std::size_t indent = raw.find_first_not_of(' ');
    if (indent == std::string::npos || raw[indent] == '#') continue;
    std::vector<Token> tokens;
    try {
      tokens = lex(std::string_view(raw).substr(indent));
    } catch (const Error& e) {
      fail(e.what());
    }
    const std::string& head = tokens.front().key;
    if (!header) {
      if (head != "hotprompt-doc" || tokens.size() < 2 || tokens[1].key != "1") fail("expected 'hotprompt-doc 1'");
      header = true;
      continue;
    }
    auto value = [&]() -> const std::string& {
      if (tokens.size() < 2) fail("missing value for " + head);
      return tokens[1].key;
    };
    if (head == "node") {
      if (indent % 2 != 0) fail("indentation must be a multiple of two spaces");
      const std::size_t depth = indent / 2;
      if (tokens.size() < 2) fail("node needs a role");
      DocNode node;
      node.role = tokens[1].key;
      for (std::size_t i = 2; i < tokens.size(); ++i) {
        const Token& t = tokens[i];
        if (!t.has_value) {
          if (t.key == "editable") node.editable = true;
          else if (t.key == "readonly") node.readonly = true;
          else if (t.key == "disabled") node.disabled = true;
          else if (t.key == "contenteditable") node.contenteditable = true;
          else if (t.key == "focus") node.focused = true;
          else if (t.key == "caret") node.caret = true;
          else if (t.key == "textpattern") node.text_pattern = true;
          else if (t.key == "notextpattern") node.text_pattern = false;
          else fail("unknown node flag '" + t.key + "'");
        } else if (t.key == "text") {
          node.text = t.value;
        } else if (t.key == "name") {
          node.name = t.value;
        } else if (t.key == "sel") {
          auto comma = t.value.find(',');
          if (comma == std::string::npos) fail("sel needs start,end");
          try {
            node.sel_start = std::stoul(t.value.substr(0, comma));
            node.sel_end = std::stoul(t.value.substr(comma + 1));
          } catch (const std::exception&) {
            fail("bad sel '" + t.value + "'");
          }
        } else {
          fail("unknown node attribute '" + t.key + "'");
        }
      }
      if (node.sel_start > node.sel_end || node.sel_end > node.text.size()) fail("selection out of bounds");
      if (depth == 0) {
        if (have_root) fail("only one root node allowed");
        doc.root = std::move(node);
        have_root = true;
        stack.assign(1, &doc.root);
      } else {
        if (depth > stack.size()) fail("node nested too deep for its parent");
        stack.resize(depth);
        DocNode& parent = *stack.back();
        parent.children.push_back(std::move(node));
        // Pointers into children stay valid: a parent only grows while it is on top.
        stack.push_back(&parent.children.back());
      }
    } else if (head == "app") {
      doc.app_name = value();
    } else if (head == "title") {
      doc.window_title = value();
    } else if (head == "pid") {
      doc.process_id = std::stol(value());
    } else if (head == "latency") {
      doc.latency = std::chrono::milliseconds(std::stol(value()));
    } else if (head == "clipboard") {
      doc.clipboard = value();
    } else if (head == "browser") {
      doc.browser = true;
    } else if (head == "clipboard-locked") {
      doc.clipboard_locked = true;
    } else if (head == "undo-disabled") {
      doc.undo_enabled = false;
    } else if (head == "rejects-paste") {
      doc.rejects_paste = true;
    } else {
      fail("unknown key '" + head + "'");
    }
  }
  if (!header) throw Error(ErrorCode::AdapterFailure, "fixture is missing the 'hotprompt-doc 1' header");
  if (!have_root) throw Error(ErrorCode::AdapterFailure, "fixture has no nodes");
  return doc;
}

SimulatedDocument SimulatedDocument::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::AdapterFailure, "cannot open fixture " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string SimulatedDocument::serialize() const {
  std::ostringstream out;
  out << "hotprompt-doc 1\n";
  out << "app " << quote(app_name) << '\n';
  out << "title " << quote(window_title) << '\n';
  out << "pid " << process_id << '\n';
  if (latency.count() != 0) out << "latency " << latency.count() << '\n';
  if (!clipboard.empty()) out << "clipboard " << quote(clipboard) << '\n';
  if (browser) out << "browser\n";
  if (clipboard_locked) out << "clipboard-locked\n";
  if (!undo_enabled) out << "undo-disabled\n";
  if (rejects_paste) out << "rejects-paste\n";
  serialize_node(out, root, 0);
  return out.str();
}

DocNode& SimulatedDocument::at(const Path& path) {
  DocNode* n = &root;
  for (std::size_t i : path) n = &n->children.at(i);
  return *n;
}

const DocNode& SimulatedDocument::at(const Path& path) const {
  const DocNode* n = &root;
  for (std::size_t i : path) n = &n->children.at(i);
  return *n;
}

std::optional<Path> SimulatedDocument::focused_path() const {
  return find_dfs(root, {}, [](const DocNode& n) { return n.focused; });
}

std::optional<Path> SimulatedDocument::caret_path() const {
  auto focus = focused_path();
  if (!focus) return std::nullopt;
  const DocNode& f = at(*focus);
  auto rebase = [&](std::optional<Path> rel) -> std::optional<Path> {
    if (!rel) return std::nullopt;
    Path full = *focus;
    full.insert(full.end(), rel->begin(), rel->end());
    return full;
  };
  if (auto p = rebase(find_dfs(f, {}, [](const DocNode& n) { return n.caret; }))) return p;
  if (auto p = rebase(find_dfs(f, {}, [](const DocNode& n) { return has_text_pattern(n); }))) return p;
  if (auto p = rebase(find_dfs(f, {}, [](const DocNode& n) { return !n.text.empty() || n.editable; }))) return p;
  return focus;
}

std::string SimulatedDocument::body() const {
  auto p = caret_path();
  return p ? at(*p).text : std::string();
}

bool SimulatedDocument::press(const Key& key) {
  key_log.push_back(key.describe());
  auto path = caret_path();
  if (!path) return false;
  DocNode& n = at(*path);

  auto replace_selection = [&](std::string_view with) {
    undo_stack.push_back({*path, n.text, n.sel_start, n.sel_end});
    n.text.replace(n.sel_start, n.sel_end - n.sel_start, with);
    n.sel_start += with.size();
    n.sel_end = n.sel_start;
  };

  switch (key.code) {
    case Key::Code::Char:
      if (!accepts_typing(n)) return false;
      replace_selection(key.text);
      return true;
    case Key::Code::Right:
      if (n.has_selection())
        n.sel_start = n.sel_end;
      else
        n.sel_start = n.sel_end = next_cp(n.text, n.sel_end);
      return true;
    case Key::Code::SelectAll:
      n.sel_start = 0;
      n.sel_end = n.text.size();
      return true;
    case Key::Code::SelectToStart:
      n.sel_start = 0;
      return true;
    case Key::Code::Copy:
      if (clipboard_locked) return false;
      if (n.has_selection()) clipboard = std::string(n.selected());
      return true;
    case Key::Code::Paste:
      if (clipboard_locked || rejects_paste || !accepts_typing(n)) return false;
      replace_selection(clipboard);
      ++paste_count;
      return true;
    case Key::Code::Undo: {
      if (!undo_enabled || undo_stack.empty()) return false;
      UndoEntry e = std::move(undo_stack.back());
      undo_stack.pop_back();
      DocNode& target = at(e.path);
      target.text = std::move(e.text);
      target.sel_start = e.sel_start;
      target.sel_end = e.sel_end;
      return true;
    }
  }
  return false;
}

// --- SimulatedAdapter -------------------------------------------------------

SimulatedAdapter::SimulatedAdapter(SimulatedDocument& doc, std::chrono::milliseconds capture_timeout)
    : doc_(doc), capture_timeout_(capture_timeout) {}

FocusContext SimulatedAdapter::capture_focus() {
  if (doc_.latency > capture_timeout_)
    throw Error(ErrorCode::CaptureFailed, "focus capture exceeded " + std::to_string(capture_timeout_.count()) + " ms");
  if (!doc_.focused_path()) throw Error(ErrorCode::CaptureFailed, "no focused element");
  if (doc_.app_name.empty()) throw Error(ErrorCode::CaptureFailed, "focused window has no process name");
  FocusContext focus;
  focus.app_name = doc_.app_name;
  focus.window_title = doc_.window_title;
  focus.process_id = doc_.process_id;
  focus.adapter_id = (doc_.browser || is_browser_app(doc_.app_name)) ? AdapterId::Web : AdapterId::Native;
  focus.editable = is_editable(focus);
  return focus;
}

bool SimulatedAdapter::is_editable(const FocusContext& focus) {
  auto path = doc_.caret_path();
  if (!path) return false;
  return editable_by_rules(focus.adapter_id, doc_.at(*path));
}

bool SimulatedAdapter::press_key(const FocusContext&, const Key& key) { return doc_.press(key); }

std::string SimulatedAdapter::read_clipboard() const {
  if (doc_.clipboard_locked) throw Error(ErrorCode::ClipboardUnavailable, "clipboard is locked by another process");
  return doc_.clipboard;
}

void SimulatedAdapter::write_clipboard(std::string text) {
  if (doc_.clipboard_locked) throw Error(ErrorCode::ClipboardUnavailable, "clipboard is locked by another process");
  doc_.clipboard = std::move(text);
}

std::string SimulatedAdapter::fallback_copy_selection() {
  const std::string saved = read_clipboard();
  write_clipboard({});
  const bool copied = doc_.press(Key::of(Key::Code::Copy));
  std::string result = doc_.clipboard;
  write_clipboard(saved);
  if (!copied) throw Error(ErrorCode::ClipboardUnavailable, "copy command refused");
  return result;
}

// Text before the caret; the caret is put back where it was.
std::string SimulatedAdapter::probe_prefix() {
  write_clipboard({});
  doc_.press(Key::of(Key::Code::SelectToStart));
  if (!doc_.press(Key::of(Key::Code::Copy))) throw Error(ErrorCode::ClipboardUnavailable, "copy command refused");
  std::string prefix = doc_.clipboard;
  doc_.press(Key::of(Key::Code::Right));
  return prefix;
}

SimulatedAdapter::FullBody SimulatedAdapter::fallback_copy_all() {
  const std::string saved = read_clipboard();
  FullBody out;
  try {
    doc_.press(Key::of(Key::Code::Right));
    const std::string before = probe_prefix();
    const bool spaced = doc_.press(Key::character(" "));
    write_clipboard({});
    doc_.press(Key::of(Key::Code::SelectAll));
    if (!doc_.press(Key::of(Key::Code::Copy))) throw Error(ErrorCode::ClipboardUnavailable, "copy command refused");
    std::string copied = doc_.clipboard;
    if (spaced) {
      const bool undone = doc_.press(Key::of(Key::Code::Undo));
      const std::string after = probe_prefix();
      if (!undone || after != before)
        throw Error(ErrorCode::UndoFailed, "undo did not remove the inserted space; document left modified");
      if (before.size() >= copied.size() || copied[before.size()] != ' ')
        throw Error(ErrorCode::AdapterFailure, "copied body does not contain the inserted space at the caret");
      copied.erase(before.size(), 1);
    } else {
      // Read-only target: nothing was typed, collapse the select-all again.
      doc_.press(Key::of(Key::Code::Right));
    }
    out.text = std::move(copied);
    out.caret_offset = before.size();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ClipboardUnavailable) doc_.clipboard = saved;
    throw;
  }
  write_clipboard(saved);
  return out;
}

SelectionCapture SimulatedAdapter::extract_selection(const FocusContext&, bool want_context) {
  auto focus = doc_.focused_path();
  if (!focus) throw Error(ErrorCode::CaptureFailed, "no focused element");
  SelectionCapture cap;
  auto rel = find_dfs(doc_.at(*focus), {}, [](const DocNode& n) { return has_text_pattern(n); });
  if (rel) {
    Path full = *focus;
    full.insert(full.end(), rel->begin(), rel->end());
    const DocNode& n = doc_.at(full);
    cap.method = CaptureMethod::Accessibility;
    cap.selected_text = std::string(n.selected());
    if (want_context) {
      cap.surrounding_text = n.text;
      cap.selection_offset = n.sel_start;
    }
    return cap;
  }

  cap.method = CaptureMethod::ClipboardFallback;
  cap.selected_text = fallback_copy_selection();
  if (want_context) {
    FullBody body = fallback_copy_all();
    cap.selection_recoverable = false;
    const std::size_t sel = cap.selected_text.size();
    if (body.caret_offset >= sel &&
        std::string_view(body.text).substr(body.caret_offset - sel, sel) == cap.selected_text)
      cap.selection_offset = body.caret_offset - sel;
    cap.surrounding_text = std::move(body.text);
    cap.context_disjoint = cap.surrounding_text->find(cap.selected_text) == std::string::npos;
  }
  return cap;
}

InsertionReport SimulatedAdapter::insert_response(const FocusContext& focus, std::string_view text, InsertMode mode) {
  if (mode == InsertMode::DirectStream)
    throw Error(ErrorCode::AdapterFailure, "direct streaming goes through TypedStreamer");
  if (text.empty()) throw Error(ErrorCode::AdapterFailure, "nothing to insert");
  if (!is_editable(focus)) throw Error(ErrorCode::NotEditable, "target does not accept text");
  const std::string saved = read_clipboard();
  write_clipboard(std::string(text));
  if (mode == InsertMode::AppendBelow) doc_.press(Key::of(Key::Code::Right));
  const bool pasted = doc_.press(Key::of(Key::Code::Paste));
  write_clipboard(saved);
  if (!pasted) throw Error(ErrorCode::PasteRejected, "paste was refused by the target");
  ++insertions_;
  return {mode, utf8::length(text), "undo:" + std::to_string(doc_.undo_stack.size())};
}

// --- typed streaming --------------------------------------------------------

TypedStreamer::TypedStreamer(FocusAdapter& adapter, FocusContext focus)
    : adapter_(adapter), focus_(std::move(focus)) {
  if (!adapter_.is_editable(focus_)) throw Error(ErrorCode::NotEditable, "target does not accept typed input");
}

void TypedStreamer::type_suffix(std::string_view target) {
  if (!target.starts_with(typed_)) return;  // not an extension of what is on screen
  for (std::string_view cp : utf8::code_points(target.substr(typed_.size()))) {
    if (cancelled_) throw CancelledMidStream(typed_chars_);
    if (!adapter_.press_key(focus_, Key::character(cp)))
      throw Error(ErrorCode::NotEditable, "target refused typed input after " + std::to_string(typed_chars_) + " characters");
    typed_.append(cp);
    ++typed_chars_;
  }
}

bool TypedStreamer::feed(const ResponseEvent& event) {
  if (finished_) return true;
  if (cancelled_) throw CancelledMidStream(typed_chars_);
  if (const auto* chunk = std::get_if<Chunk>(&event)) {
    type_suffix(chunk->accumulated_text);
    return false;
  }
  finished_ = true;
  if (const auto* done = std::get_if<Done>(&event)) {
    if (!std::string_view(done->final_text).starts_with(typed_))
      throw Error(ErrorCode::AdapterFailure, "final response diverges from the text already typed");
    type_suffix(done->final_text);
  }
  return true;
}

InsertionReport TypedStreamer::report() const {
  return {InsertMode::DirectStream, typed_chars_, {}};
}

InsertionReport stream_typed(FocusAdapter& adapter, const FocusContext& focus,
                             std::span<const ResponseEvent> events, const std::atomic<bool>* cancel) {
  TypedStreamer streamer(adapter, focus);
  for (const auto& e : events) {
    if (cancel && cancel->load()) streamer.cancel();
    if (streamer.feed(e)) break;
  }
  return streamer.report();
}

// --- WebAdapter ---------------------------------------------------------------

WebAdapter::WebAdapter(Requester requester, std::chrono::milliseconds timeout)
    : requester_(std::move(requester)), timeout_(timeout) {}

FocusContext WebAdapter::capture_focus() {
  throw Error(ErrorCode::CaptureFailed, "web focus is captured by the native layer");
}

SelectionCapture WebAdapter::extract_selection(const FocusContext&, bool want_context) {
  BridgeMessage reply = requester_(
      BridgeMessage::make(MessageType::ExtractSelection, {}, {{"want_context", want_context}}), timeout_);
  if (reply.kind() == MessageType::Error)
    throw Error(ErrorCode::AdapterFailure, reply.body.value("code", "error") + ": " + reply.body.value("detail", ""));
  if (reply.kind() != MessageType::SelectionResult)
    throw Error(ErrorCode::ProtocolError, "unexpected reply " + reply.type);
  if (reply.body.contains("error"))
    throw Error(ErrorCode::AdapterFailure, reply.body["error"].get<std::string>());
  SelectionCapture cap;
  cap.method = CaptureMethod::Extension;
  cap.selected_text = reply.body.value("text", "");
  if (want_context && reply.body.contains("context") && reply.body["context"].is_string()) {
    cap.surrounding_text = reply.body["context"].get<std::string>();
    auto pos = cap.surrounding_text->find(cap.selected_text);
    if (pos != std::string::npos) cap.selection_offset = pos;
    cap.context_disjoint = pos == std::string::npos;
  }
  last_editable_ = reply.body.value("editable", false);
  return cap;
}

bool WebAdapter::is_editable(const FocusContext&) { return last_editable_.value_or(false); }

InsertionReport WebAdapter::insert_response(const FocusContext& focus, std::string_view text, InsertMode mode) {
  if (text.empty()) throw Error(ErrorCode::AdapterFailure, "nothing to insert");
  if (!is_editable(focus)) throw Error(ErrorCode::NotEditable, "page element is not editable");
  BridgeMessage reply = requester_(
      BridgeMessage::make(MessageType::InsertText, {}, {{"text", std::string(text)}, {"mode", to_string(mode)}}),
      timeout_);
  if (reply.kind() == MessageType::Error) {
    const std::string code = reply.body.value("code", "");
    if (code == "NotEditable") throw Error(ErrorCode::NotEditable, reply.body.value("detail", ""));
    throw Error(ErrorCode::PasteRejected, code + ": " + reply.body.value("detail", ""));
  }
  if (reply.kind() != MessageType::InsertAck) throw Error(ErrorCode::ProtocolError, "unexpected reply " + reply.type);
  return {mode, utf8::length(text), reply.body.value("undo_token", "")};
}

bool WebAdapter::press_key(const FocusContext&, const Key& key) {
  if (key.code != Key::Code::Char) return false;
  BridgeMessage reply = requester_(
      BridgeMessage::make(MessageType::InsertText, {}, {{"text", key.text}, {"mode", "type"}}), timeout_);
  return reply.kind() == MessageType::InsertAck;
}

WebAdapter::Requester make_blocking_requester(BridgeEndpoint& endpoint) {
  return [&endpoint](BridgeMessage message, std::chrono::milliseconds timeout) {
    auto promise = std::make_shared<std::promise<BridgeMessage>>();
    auto future = promise->get_future();
    auto settled = std::make_shared<std::atomic<bool>>(false);
    const auto request_type = *message.kind();
    endpoint.request(std::move(message), [promise, settled, request_type](const BridgeMessage& reply) {
      auto kind = reply.kind();
      if (kind && is_terminal_reply(request_type, *kind) && !settled->exchange(true)) promise->set_value(reply);
    });
    if (future.wait_for(timeout) != std::future_status::ready)
      throw Error(ErrorCode::CaptureFailed, "extension did not answer within " + std::to_string(timeout.count()) + " ms");
    return future.get();
  };
}

// --- AdapterRouter ------------------------------------------------------------

FocusAdapter& AdapterRouter::route(const FocusContext& focus) {
  return (focus.adapter_id == AdapterId::Web && web_) ? *web_ : native_;
}

FocusContext AdapterRouter::capture_focus() { return native_.capture_focus(); }

SelectionCapture AdapterRouter::extract_selection(const FocusContext& focus, bool want_context) {
  return route(focus).extract_selection(focus, want_context);
}

InsertionReport AdapterRouter::insert_response(const FocusContext& focus, std::string_view text, InsertMode mode) {
  return route(focus).insert_response(focus, text, mode);
}

bool AdapterRouter::is_editable(const FocusContext& focus) { return route(focus).is_editable(focus); }

bool AdapterRouter::press_key(const FocusContext& focus, const Key& key) { return route(focus).press_key(focus, key); }

}  // namespace hotprompt
