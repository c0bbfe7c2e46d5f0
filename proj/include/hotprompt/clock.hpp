#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>

namespace hotprompt {

/// Milliseconds since an arbitrary epoch. Simulated clocks start at 0.
using Millis = std::int64_t;

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Millis now() const = 0;
};

class SystemClock final : public Clock {
 public:
  Millis now() const override {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
  }
};

/// Manually advanced clock for deterministic tests and headless runs.
class SimulatedClock final : public Clock {
 public:
  explicit SimulatedClock(Millis start = 0) : now_(start) {}

  Millis now() const override { return now_.load(); }
  void advance(Millis delta) { now_ += delta; }
  void set(Millis t) { now_ = t; }

 private:
  std::atomic<Millis> now_;
};

}  // namespace hotprompt
