#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hotprompt/clock.hpp"

namespace hotprompt {

/// Identifies a conversation by the app and window it was started from.
class SessionKey {
 public:
  SessionKey() = default;
  SessionKey(std::string app_name, std::string window_title);

  const std::string& app_name() const { return app_name_; }
  const std::string& window_title() const { return window_title_; }
  /// Lowercased, trimmed "app<US>title"; just the app when the title is empty.
  const std::string& normalized() const { return normalized_; }

  friend bool operator==(const SessionKey& l, const SessionKey& r) { return l.normalized_ == r.normalized_; }

 private:
  std::string app_name_;
  std::string window_title_;
  std::string normalized_;
};

struct Exchange {
  std::string prompt;
  std::string response;
  Millis timestamp = 0;

  friend bool operator==(const Exchange&, const Exchange&) = default;
};

struct ChatSession {
  SessionKey key;
  /// Provider chat id or relay tab reference; empty until the backend assigns one.
  std::string backend_session_ref;
  std::vector<Exchange> exchanges;
  Millis created = 0;
  Millis last_used = 0;

  friend bool operator==(const ChatSession& l, const ChatSession& r) {
    return l.key.normalized() == r.key.normalized() && l.key.app_name() == r.key.app_name() &&
           l.key.window_title() == r.key.window_title() &&
           l.backend_session_ref == r.backend_session_ref && l.exchanges == r.exchanges &&
           l.created == r.created && l.last_used == r.last_used;
  }
};

/// Persistent map from SessionKey to ChatSession. Every mutation is written
/// through to disk with temp-file + rename. An empty path keeps it in memory.
///
/// Single writer; hand `snapshot()` copies to other threads.
class SessionStore {
 public:
  enum class FaultPoint { None, BeforeRename };

  /// Loads `path` if it exists. Throws Error{StoreUnavailable} on unreadable or
  /// corrupt files.
  explicit SessionStore(std::filesystem::path path = {});

  std::pair<ChatSession, bool> lookup_or_create(const SessionKey& key, Millis now);
  ChatSession append_exchange(const SessionKey& key, std::string prompt, std::string response,
                              Millis now);
  /// The ref is write-once: a different non-empty ref for the same session throws.
  ChatSession set_backend_ref(const SessionKey& key, std::string ref);
  std::size_t evict(Millis before);

  std::optional<ChatSession> find(const SessionKey& key) const;
  std::vector<ChatSession> snapshot() const { return sessions_; }
  std::size_t size() const { return sessions_.size(); }

  void reload();
  std::string serialize() const;
  /// Plain-text dump, one block per session.
  std::string export_text() const;

  const std::filesystem::path& path() const { return path_; }

  /// Test hook: simulate a crash at the given point of the next save.
  void inject_fault(FaultPoint point) { fault_ = point; }

 private:
  ChatSession* find_mut(const SessionKey& key);
  void save();

  std::filesystem::path path_;
  std::vector<ChatSession> sessions_;
  FaultPoint fault_ = FaultPoint::None;
};

}  // namespace hotprompt
