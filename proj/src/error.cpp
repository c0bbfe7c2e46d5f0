#include "hotprompt/error.hpp"

namespace hotprompt {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::HotkeyUnavailable: return "HotkeyUnavailable";
    case ErrorCode::IllegalTransition: return "IllegalTransition";
    case ErrorCode::CaptureFailed: return "CaptureFailed";
    case ErrorCode::AdapterFailure: return "AdapterFailure";
    case ErrorCode::ClipboardUnavailable: return "ClipboardUnavailable";
    case ErrorCode::UndoFailed: return "UndoFailed";
    case ErrorCode::NotEditable: return "NotEditable";
    case ErrorCode::PasteRejected: return "PasteRejected";
    case ErrorCode::CancelledMidStream: return "CancelledMidStream";
    case ErrorCode::EmptyQuery: return "EmptyQuery";
    case ErrorCode::UnknownSlot: return "UnknownSlot";
    case ErrorCode::StoreUnavailable: return "StoreUnavailable";
    case ErrorCode::Busy: return "Busy";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::UnknownRequest: return "UnknownRequest";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::ProtocolError: return "ProtocolError";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::ChannelClosed: return "ChannelClosed";
  }
  return "Unknown";
}

std::optional<ErrorCode> parse_error_code(std::string_view name) noexcept {
  for (int i = 0; i <= static_cast<int>(ErrorCode::ChannelClosed); ++i)
    if (to_string(static_cast<ErrorCode>(i)) == name) return static_cast<ErrorCode>(i);
  return std::nullopt;
}

}  // namespace hotprompt
