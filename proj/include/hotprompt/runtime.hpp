#pragma once

#include <filesystem>
#include <optional>
#include <ostream>

#include "hotprompt/config.hpp"

namespace hotprompt {

/// Process exit statuses of run_service.
enum class ExitStatus : int {
  Ok = 0,
  ScriptFailed = 1,
  ConfigInvalid = 2,
  HotkeyUnavailable = 3,
  RuntimeError = 4,
};

struct RunOptions {
  /// Headless: drive the service from this script instead of the hotkey.
  std::optional<std::filesystem::path> script;
  /// Headless runs use a simulated clock with the mock backend unless set.
  bool realtime = false;
  /// Bridge to the browser extension (native-messaging style framing).
  int extension_in = 0;
  int extension_out = 1;
  /// Receives script failure lines and the final summary.
  std::ostream* report = nullptr;
};

/// Builds adapter, store, gateway and service from `config` and runs the event
/// loop until a Shutdown message, the end of the script, or SIGINT/SIGTERM.
/// Never throws; errors map to ExitStatus.
ExitStatus run_service(const ServiceConfig& config, const RunOptions& options);

/// Installs SIGINT/SIGTERM handlers that request loop shutdown.
void install_signal_handlers();
bool shutdown_signalled();
void reset_shutdown_signal();

}  // namespace hotprompt
