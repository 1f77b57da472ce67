#pragma once

#include <cstddef>
#include <deque>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include "sentinel/clock.hpp"
#include "sentinel/domain.hpp"

namespace sentinel {

struct RateLimitConfig {
  int max_requests = 100;          // per source per window
  Millis window_ms = 10'000;
  Millis ban_ms = 60'000;
  std::size_t max_tracked_sources = 10'000;
};

// Exact sliding-window limiter with fixed-duration bans. State is sharded
// by source so concurrent requests only contend when they share a source
// hash; there is no global lock on the request path.
class DosGuard {
 public:
  explicit DosGuard(RateLimitConfig cfg);

  struct Outcome {
    Verdict verdict;
    bool ban_started = false;  // true exactly once per ban
  };

  // Records the request against `source` and says whether it may proceed.
  // A denied request is not counted toward the window. Exceeding the limit
  // starts a ban of ban_ms; requests during a ban are denied without
  // extending it. Starting a ban discards the window, so after expiry the
  // source begins with an empty history.
  Outcome record_and_check(const std::string& source, Millis now);

  // Drops sources with no activity inside the window. Never drops a source
  // whose ban is still running.
  std::size_t purge(Millis now);

  std::size_t tracked_sources() const;
  bool banned(const std::string& source, Millis now) const;
  const RateLimitConfig& config() const { return cfg_; }

 private:
  struct SourceState {
    std::deque<Millis> stamps;  // admitted request times, ascending
    std::optional<Millis> banned_until;
    Millis last_activity = 0;
  };
  struct Shard {
    mutable std::mutex mu;
    std::unordered_map<std::string, SourceState> sources;
  };

  static constexpr std::size_t kShards = 64;

  Shard& shard_for(const std::string& source);
  const Shard& shard_for(const std::string& source) const;
  bool evict_if_full(Shard& shard, Millis now);

  RateLimitConfig cfg_;
  std::size_t per_shard_cap_;
  Shard shards_[kShards];
};

}  // namespace sentinel
