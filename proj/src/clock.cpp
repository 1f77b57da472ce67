#include "sentinel/clock.hpp"

#include <chrono>

namespace sentinel {

Millis SystemClock::now_ms() const {
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  return std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
}

}  // namespace sentinel
