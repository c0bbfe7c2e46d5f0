#pragma once

#include <chrono>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "hotprompt/diff.hpp"
#include "hotprompt/gateway.hpp"
#include "hotprompt/prompt.hpp"

namespace hotprompt {

enum class Modifier { Ctrl, Alt, Shift, Super };

std::string_view to_string(Modifier m) noexcept;

/// Key chord that opens the menu, written "Alt+1", "Ctrl+Shift+Space".
struct HotkeyBinding {
  std::set<Modifier> modifiers;
  std::string key;

  /// Throws Error{ConfigInvalid} for empty chords or unknown modifiers.
  static HotkeyBinding parse(std::string_view text);
  static HotkeyBinding default_binding() { return parse("Alt+1"); }
  /// Canonical spelling: modifiers in Ctrl, Alt, Shift, Super order.
  std::string describe() const;

  friend bool operator==(const HotkeyBinding&, const HotkeyBinding&) = default;
};

enum class BackendKind { Api, Relay, Mock };

std::string_view to_string(BackendKind kind) noexcept;
/// Throws Error{ConfigInvalid}.
BackendKind parse_backend_kind(std::string_view name);

/// INI file; every key is optional. Comments (; or #) go on their own line.
///
///     [service]
///     hotkey = Alt+1               (comma-separated for several chords)
///     backend = mock               (api, relay or mock)
///     include_context = false
///     context_limit = 8000         (code points)
///     capture_timeout_ms = 200
///     store = sessions.json        (empty keeps sessions in memory)
///     session_ttl_ms = 0           (0 disables eviction)
///     diff = word                  (word or character)
///     lock_dir = /tmp              (hotkey registration locks)
///     ui_socket = popup.sock       (Unix socket for the popup)
///
///     [quiescence]
///     window_ms = 1000
///     hard_timeout_ms = 120000
///
///     [quick_actions]
///     language = English
///
///     [quick.3]                    (overrides or adds slot 3)
///     label = rewrite formally
///     template = Rewrite the selected text in a formal register.
///
///     [api]        base_url, model, key_env, read_timeout_ms
///     [relay]      home_url
///     [mock]       scenario
///     [simulated]  fixture
///
/// Relative paths resolve against the config file's directory. Unknown
/// sections and keys are rejected.
struct ServiceConfig {
  std::vector<HotkeyBinding> hotkeys{HotkeyBinding::default_binding()};
  BackendKind backend = BackendKind::Mock;
  QuickActionSet quick_actions = QuickActionSet::defaults();
  bool include_context = false;
  std::size_t context_limit = 8000;
  std::chrono::milliseconds capture_timeout{200};
  std::filesystem::path store_path;
  Millis session_ttl_ms = 0;
  Granularity diff_granularity = Granularity::Word;
  QuiescenceRule quiescence;
  ApiConfig api;
  std::string relay_home_url = "https://chat.example.invalid/";
  std::filesystem::path mock_scenario;
  std::filesystem::path fixture;
  std::filesystem::path lock_dir;
  std::filesystem::path ui_socket;

  /// Throws Error{ConfigInvalid}.
  static ServiceConfig parse_ini(std::string_view text, const std::filesystem::path& base_dir = {});
  static ServiceConfig load(const std::filesystem::path& path);
  void validate() const;
};

/// Holds a process-wide claim on a hotkey chord. Claims are advisory file
/// locks under a shared directory, so a second holder of the same chord fails
/// while the first is alive and the claim vanishes with the process.
class HotkeyRegistration {
 public:
  /// Throws Error{HotkeyUnavailable}.
  HotkeyRegistration(const HotkeyBinding& binding, const std::filesystem::path& lock_dir);
  ~HotkeyRegistration();
  HotkeyRegistration(HotkeyRegistration&& other) noexcept;
  HotkeyRegistration& operator=(HotkeyRegistration&&) = delete;
  HotkeyRegistration(const HotkeyRegistration&) = delete;

  const HotkeyBinding& binding() const { return binding_; }
  const std::filesystem::path& lock_path() const { return path_; }

 private:
  HotkeyBinding binding_;
  std::filesystem::path path_;
  int fd_ = -1;
};

std::filesystem::path default_lock_dir();

}  // namespace hotprompt
