#pragma once

#include <functional>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "hotprompt/service.hpp"

namespace hotprompt {

/// Scripted event source replacing the OS hotkey. One command per line;
/// blank lines and lines starting with '#' are skipped. TEXT is either the
/// rest of the line or a JSON string literal.
///
///     trigger
///     quick N [TEXT]          quick action N, optional extra text
///     submit TEXT
///     submit! TEXT            direct (modifier held at submit)
///     retype TEXT
///     accept                  TAB
///     accept-append           Shift+TAB
///     escape
///     cancel
///     advance MS              let time pass
///     await STATE [MS]        run until the state is reached (default 10000 ms)
///     expect-state STATE
///     expect-error CODE       the previous command failed with CODE
///     expect-body TEXT        simulated target text
///     expect-clipboard TEXT
///     expect-insertions N
///     shutdown
class ScriptRunner {
 public:
  /// Advances time by the given milliseconds, driving the service meanwhile.
  using Advance = std::function<void(Millis)>;

  ScriptRunner(Service& service, Advance advance, SimulatedDocument* document = nullptr);

  struct Result {
    int failures = 0;
    bool shutdown = false;
    std::vector<std::string> log;
  };

  Result run(std::istream& script);
  /// Runs one line; returns false if it was an unmet expectation.
  bool step(const std::string& line, Result& result);

 private:
  Service& service_;
  Advance advance_;
  SimulatedDocument* document_;
  std::optional<ErrorCode> last_error_;
};

/// Advance callback for a simulated clock: steps of `step` ms, ticking the service.
ScriptRunner::Advance simulated_advance(Service& service, SimulatedClock& clock, Millis step = 10);
/// Advance callback for wall-clock runs.
ScriptRunner::Advance realtime_advance(Service& service);

}  // namespace hotprompt
