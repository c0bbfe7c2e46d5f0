#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hotprompt/error.hpp"
#include "hotprompt/response_event.hpp"

namespace hotprompt {

class BridgeEndpoint;
struct BridgeMessage;

enum class AdapterId { Native, Web };
enum class CaptureMethod { Accessibility, ClipboardFallback, Extension };
enum class InsertMode { Replace, AppendBelow, DirectStream };

std::string_view to_string(AdapterId id) noexcept;
std::string_view to_string(CaptureMethod method) noexcept;
std::string_view to_string(InsertMode mode) noexcept;

struct FocusContext {
  std::string app_name;
  std::string window_title;
  long process_id = 0;
  /// Drives TAB visibility in the menu.
  bool editable = false;
  AdapterId adapter_id = AdapterId::Native;

  friend bool operator==(const FocusContext&, const FocusContext&) = default;
};

struct SelectionCapture {
  std::string selected_text;
  std::optional<std::string> surrounding_text;
  /// Byte offset of the selection inside surrounding_text, when known.
  std::optional<std::size_t> selection_offset;
  CaptureMethod method = CaptureMethod::Accessibility;
  bool selection_recoverable = true;
  /// surrounding_text does not contain selected_text.
  bool context_disjoint = false;
};

struct InsertionReport {
  InsertMode mode = InsertMode::Replace;
  std::size_t chars_written = 0;
  std::string undo_token;
};

/// Thrown by stream_typed when cancelled; `typed` characters made it out.
class CancelledMidStream : public Error {
 public:
  explicit CancelledMidStream(std::size_t typed)
      : Error(ErrorCode::CancelledMidStream, std::to_string(typed) + " characters typed"), typed_(typed) {}
  std::size_t typed() const noexcept { return typed_; }

 private:
  std::size_t typed_;
};

/// Synthetic keyboard input understood by adapters.
struct Key {
  enum class Code { Char, Right, SelectAll, Copy, Paste, Undo, SelectToStart };
  Code code = Code::Char;
  std::string text;  // Char only: one code point

  static Key character(std::string_view cp) { return {Code::Char, std::string(cp)}; }
  static Key of(Code c) { return {c, {}}; }
  std::string describe() const;
  friend bool operator==(const Key&, const Key&) = default;
};

inline constexpr std::chrono::milliseconds kDefaultCaptureTimeout{200};

/// Reads from and writes to the foreground application.
/// Calls are serialized by the owner; adapters are not thread-safe.
class FocusAdapter {
 public:
  virtual ~FocusAdapter() = default;

  /// Throws Error{CaptureFailed}.
  virtual FocusContext capture_focus() = 0;
  virtual SelectionCapture extract_selection(const FocusContext& focus, bool want_context) = 0;
  /// Throws Error{NotEditable} / Error{PasteRejected} / Error{ClipboardUnavailable}.
  virtual InsertionReport insert_response(const FocusContext& focus, std::string_view text, InsertMode mode) = 0;
  /// Unknown targets are reported as not editable.
  virtual bool is_editable(const FocusContext& focus) = 0;
  /// Delivers one synthetic key to the focused control. False when the target refused it.
  virtual bool press_key(const FocusContext& focus, const Key& key) = 0;
};

/// Types a response into the target as it streams in. Each Chunk types only
/// the new suffix of the accumulated text; Done types whatever is missing.
class TypedStreamer {
 public:
  TypedStreamer(FocusAdapter& adapter, FocusContext focus);

  /// Returns true once a terminal event has been consumed.
  /// Throws CancelledMidStream, or Error{NotEditable} if the target refuses keys.
  bool feed(const ResponseEvent& event);
  void cancel() { cancelled_ = true; }
  /// Flag checked between key events; may be set from another thread.
  std::atomic<bool>& cancel_flag() { return cancelled_; }

  std::size_t typed_chars() const { return typed_chars_; }
  const std::string& typed_text() const { return typed_; }
  InsertionReport report() const;

 private:
  void type_suffix(std::string_view target);

  FocusAdapter& adapter_;
  FocusContext focus_;
  std::string typed_;
  std::size_t typed_chars_ = 0;
  std::atomic<bool> cancelled_{false};
  bool finished_ = false;
};

/// Convenience wrapper over TypedStreamer for a recorded event sequence.
InsertionReport stream_typed(FocusAdapter& adapter, const FocusContext& focus,
                             std::span<const ResponseEvent> events,
                             const std::atomic<bool>* cancel = nullptr);

// ---------------------------------------------------------------------------
// Simulated application, the backing store for headless runs and tests.

struct DocNode {
  std::string role;
  std::string name;
  std::string text;
  /// Byte offsets into text; the caret sits at sel_end.
  std::size_t sel_start = 0;
  std::size_t sel_end = 0;
  bool editable = false;
  bool readonly = false;
  bool disabled = false;
  bool contenteditable = false;
  bool focused = false;
  bool caret = false;
  /// Overrides the role's default text-pattern support.
  std::optional<bool> text_pattern;
  std::vector<DocNode> children;

  bool has_selection() const { return sel_end > sel_start; }
  std::string_view selected() const { return std::string_view(text).substr(sel_start, sel_end - sel_start); }
  friend bool operator==(const DocNode&, const DocNode&) = default;
};

/// Roles exposing a text pattern unless overridden: edit, document, text.
bool has_text_pattern(const DocNode& node);

/// Editability rule table. Native: edit/document roles flagged editable and
/// neither read-only nor disabled. Web: input/textarea not read-only or
/// disabled, or any content-editable element. Everything else is false.
bool editable_by_rules(AdapterId adapter, const DocNode& node);

struct UndoEntry {
  std::vector<std::size_t> path;
  std::string text;
  std::size_t sel_start = 0;
  std::size_t sel_end = 0;
};

/// Fixture format (line oriented, UTF-8):
///
///     hotprompt-doc 1
///     app "WINWORD"
///     title "Essay.docx - Word"
///     pid 4242
///     node window
///       node edit editable focus text="Teh quick brown fox" sel=0,9
///
/// Header keys: app, title, pid, latency (ms), clipboard, and the bare flags
/// browser, clipboard-locked, undo-disabled, rejects-paste. `node` lines nest
/// by two-space indentation; node flags are editable, readonly, disabled,
/// contenteditable, focus, caret, textpattern, notextpattern; attributes are
/// name=, text= (JSON string literals) and sel=<start>,<end> (byte offsets).
struct SimulatedDocument {
  std::string app_name;
  std::string window_title;
  long process_id = 1;
  bool browser = false;
  std::chrono::milliseconds latency{0};
  DocNode root;
  std::string clipboard;
  bool clipboard_locked = false;
  bool undo_enabled = true;
  bool rejects_paste = false;
  std::vector<UndoEntry> undo_stack;
  std::vector<std::string> key_log;
  std::size_t paste_count = 0;

  static SimulatedDocument parse(std::string_view fixture);
  static SimulatedDocument load(const std::string& path);
  std::string serialize() const;

  /// Path (child indices from root) of the focused node.
  std::optional<std::vector<std::size_t>> focused_path() const;
  /// Node receiving keystrokes: first `caret` node under focus, else the first
  /// text-pattern node, else the first node with text or marked editable.
  std::optional<std::vector<std::size_t>> caret_path() const;

  DocNode& at(const std::vector<std::size_t>& path);
  const DocNode& at(const std::vector<std::size_t>& path) const;

  /// Applies one key the way a plain text control would. False if refused.
  bool press(const Key& key);

  /// Text of the keystroke target (empty if there is none).
  std::string body() const;
};

/// Adapter over a SimulatedDocument. Browser apps are routed to the web path.
class SimulatedAdapter final : public FocusAdapter {
 public:
  explicit SimulatedAdapter(SimulatedDocument& doc,
                            std::chrono::milliseconds capture_timeout = kDefaultCaptureTimeout);

  FocusContext capture_focus() override;
  SelectionCapture extract_selection(const FocusContext& focus, bool want_context) override;
  InsertionReport insert_response(const FocusContext& focus, std::string_view text, InsertMode mode) override;
  bool is_editable(const FocusContext& focus) override;
  bool press_key(const FocusContext& focus, const Key& key) override;

  /// Ctrl+C path; the prior clipboard is restored. Throws Error{ClipboardUnavailable}.
  std::string fallback_copy_selection();

  struct FullBody {
    std::string text;
    /// Byte offset of the caret (bottom of the former selection) in `text`.
    std::size_t caret_offset = 0;
  };
  /// Right, Space, Ctrl+A, Ctrl+C, Ctrl+Z. The caret position is probed with
  /// Shift+Ctrl+Home / Ctrl+C / Right before the space and after the undo so
  /// the inserted space can be removed and a failed undo detected.
  /// Throws Error{ClipboardUnavailable} / Error{UndoFailed}.
  FullBody fallback_copy_all();

  SimulatedDocument& document() { return doc_; }
  std::size_t insertions() const { return insertions_; }

 private:
  std::string read_clipboard() const;
  void write_clipboard(std::string text);
  std::string probe_prefix();

  SimulatedDocument& doc_;
  std::chrono::milliseconds capture_timeout_;
  std::size_t insertions_ = 0;
};

/// Browser pages, reached through the extension over the bridge.
class WebAdapter final : public FocusAdapter {
 public:
  /// Sends a request and blocks for its terminal reply; throws Error{CaptureFailed} on timeout.
  using Requester = std::function<BridgeMessage(BridgeMessage, std::chrono::milliseconds)>;

  WebAdapter(Requester requester, std::chrono::milliseconds timeout = kDefaultCaptureTimeout);

  /// Web focus comes from the native layer; this only marks the context as web.
  FocusContext capture_focus() override;
  SelectionCapture extract_selection(const FocusContext& focus, bool want_context) override;
  InsertionReport insert_response(const FocusContext& focus, std::string_view text, InsertMode mode) override;
  bool is_editable(const FocusContext& focus) override;
  bool press_key(const FocusContext& focus, const Key& key) override;

 private:
  Requester requester_;
  std::chrono::milliseconds timeout_;
  std::optional<bool> last_editable_;
};

/// Blocking request helper over an endpoint whose replies arrive on another
/// thread or synchronously inside send().
WebAdapter::Requester make_blocking_requester(BridgeEndpoint& endpoint);

/// Browser process names recognised by capture_focus routing.
bool is_browser_app(std::string_view app_name);

/// Picks the native or web adapter per FocusContext::adapter_id.
class AdapterRouter final : public FocusAdapter {
 public:
  explicit AdapterRouter(FocusAdapter& native, FocusAdapter* web = nullptr) : native_(native), web_(web) {}

  void attach_web(FocusAdapter* web) { web_ = web; }

  FocusContext capture_focus() override;
  SelectionCapture extract_selection(const FocusContext& focus, bool want_context) override;
  InsertionReport insert_response(const FocusContext& focus, std::string_view text, InsertMode mode) override;
  bool is_editable(const FocusContext& focus) override;
  bool press_key(const FocusContext& focus, const Key& key) override;

 private:
  FocusAdapter& route(const FocusContext& focus);

  FocusAdapter& native_;
  FocusAdapter* web_;
};

}  // namespace hotprompt
