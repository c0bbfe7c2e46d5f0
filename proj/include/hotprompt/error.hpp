#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hotprompt {

enum class ErrorCode {
  // service-core
  ConfigInvalid,
  HotkeyUnavailable,
  IllegalTransition,
  // focus-adapter
  CaptureFailed,
  AdapterFailure,
  ClipboardUnavailable,
  UndoFailed,
  NotEditable,
  PasteRejected,
  CancelledMidStream,
  // prompt-engine
  EmptyQuery,
  UnknownSlot,
  // session-store
  StoreUnavailable,
  // llm-gateway
  Busy,
  BackendUnavailable,
  UnknownRequest,
  // bridge-protocol
  TooLarge,
  ProtocolError,
  VersionMismatch,
  ChannelClosed,
};

std::string_view to_string(ErrorCode code) noexcept;
std::optional<ErrorCode> parse_error_code(std::string_view name) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hotprompt
