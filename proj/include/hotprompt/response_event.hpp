#pragma once

#include <string>
#include <string_view>
#include <variant>

namespace hotprompt {

enum class FailureKind {
  Cancelled,
  AuthFailed,
  BackendUnavailable,
  HardTimeout,
  ProtocolError,
  ConnectionLost,
  RediscoveryFailed,
};

std::string_view to_string(FailureKind kind) noexcept;

/// Full response text so far (never a delta).
struct Chunk {
  std::string accumulated_text;
  friend bool operator==(const Chunk&, const Chunk&) = default;
};

struct Done {
  std::string final_text;
  friend bool operator==(const Done&, const Done&) = default;
};

struct Failed {
  FailureKind kind = FailureKind::BackendUnavailable;
  std::string detail;
  /// Text received before the failure, if any.
  std::string partial_text;
  friend bool operator==(const Failed&, const Failed&) = default;
};

/// Normalized stream item from any backend: (Chunk)* followed by one Done or Failed.
using ResponseEvent = std::variant<Chunk, Done, Failed>;

inline bool is_terminal(const ResponseEvent& e) { return !std::holds_alternative<Chunk>(e); }

/// Latest text carried by the event (partial text for failures).
inline const std::string& event_text(const ResponseEvent& e) {
  if (const auto* c = std::get_if<Chunk>(&e)) return c->accumulated_text;
  if (const auto* d = std::get_if<Done>(&e)) return d->final_text;
  return std::get<Failed>(e).partial_text;
}

std::string describe(const ResponseEvent& e);

}  // namespace hotprompt
