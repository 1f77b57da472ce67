#pragma once

#include <atomic>
#include <cstdint>

namespace sentinel {

// All timestamps in the gateway are integer milliseconds since the Unix
// epoch, supplied by the caller through a Clock. Nothing in the core reads
// wall time directly; tests and the evaluation harness script time.
using Millis = std::int64_t;

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Millis now_ms() const = 0;
};

// Wall clock, used by `serve`.
class SystemClock final : public Clock {
 public:
  Millis now_ms() const override;
};

// Scripted clock for tests and the harness.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(Millis start = 0) : now_(start) {}
  Millis now_ms() const override { return now_.load(std::memory_order_relaxed); }
  void set(Millis t) { now_.store(t, std::memory_order_relaxed); }
  void advance(Millis delta) { now_.fetch_add(delta, std::memory_order_relaxed); }

 private:
  std::atomic<Millis> now_;
};

}  // namespace sentinel
