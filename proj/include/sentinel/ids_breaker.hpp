#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <set>
#include <string>

#include "sentinel/clock.hpp"
#include "sentinel/domain.hpp"

namespace sentinel {

struct DetectionPolicy {
  int threshold = 3;
  Millis window_ms = 5'000;
  std::set<ThreatKind> watched = {ThreatKind::Forgery, ThreatKind::Replay,
                                  ThreatKind::RuleMatch,
                                  ThreatKind::TamperedRecord};
  Millis reset_cooldown_ms = 30'000;
};

enum class LinkState { Connected, Isolated };

struct BreakerStatus {
  LinkState state = LinkState::Connected;
  std::optional<Millis> tripped_at;
  std::string trip_reason;
  std::uint64_t trip_count = 0;
};

enum class BreakerResetError { NotTripped, CooldownActive, PermissionDenied };

const char* to_string(LinkState s);
const char* to_string(BreakerResetError e);

// Event-threshold breaker between tier 1 (gateway) and tier 2 (stores).
// Reaching `threshold` watched events inside a sliding window isolates the
// link; it stays isolated until an authorized manual reset after the
// cooldown. The trip decision is a pure function of the observed event
// stream and the policy, which the tests replay independently.
class TierBreaker {
 public:
  TierBreaker(DetectionPolicy policy, AuditLog* audit);

  // Called for every audited threat event. Unwatched kinds are ignored.
  // Returns the state after the observation.
  LinkState observe(const ThreatEvent& event);

  // Gate for one tier-2 operation: admits and counts it when Connected.
  bool admit_tier2(Millis now);

  // Precondition for reset: Isolated, cooldown elapsed, operator
  // authorized. On success the window is cleared and an AdminAction event
  // is recorded; a failed authorization records PermissionDenied.
  std::optional<BreakerResetError> reset(Millis now,
                                         const std::string& operator_id);

  BreakerStatus status() const;
  LinkState state() const;
  std::uint64_t tier2_ops() const;

  const DetectionPolicy& policy() const { return policy_; }

  // Operator check; defaults to rejecting everyone (fail closed).
  void set_reset_authorizer(std::function<bool(const std::string&)> fn);
  // Receives "TRIP <unix_ms> <reason>" lines; wired to the notification
  // file by the gateway.
  void set_trip_notifier(std::function<void(const std::string&)> fn);

 private:
  void trip_locked(Millis now, ThreatKind last_kind);

  DetectionPolicy policy_;
  AuditLog* audit_;

  mutable std::mutex mu_;
  std::deque<Millis> hits_;  // watched event times, ascending
  LinkState state_ = LinkState::Connected;
  std::optional<Millis> tripped_at_;
  std::string trip_reason_;
  std::uint64_t trip_count_ = 0;
  std::uint64_t tier2_ops_ = 0;
  std::function<bool(const std::string&)> authorizer_;
  std::function<void(const std::string&)> notifier_;
};

}  // namespace sentinel
