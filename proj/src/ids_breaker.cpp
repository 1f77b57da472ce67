#include "sentinel/ids_breaker.hpp"

#include <sstream>

namespace sentinel {

const char* to_string(LinkState s) {
  return s == LinkState::Connected ? "connected" : "isolated";
}

const char* to_string(BreakerResetError e) {
  switch (e) {
    case BreakerResetError::NotTripped: return "breaker is not tripped";
    case BreakerResetError::CooldownActive: return "cooldown still active";
    case BreakerResetError::PermissionDenied: return "operator not authorized";
  }
  return "?";
}

TierBreaker::TierBreaker(DetectionPolicy policy, AuditLog* audit)
    : policy_(std::move(policy)), audit_(audit) {}

void TierBreaker::trip_locked(Millis now, ThreatKind last_kind) {
  state_ = LinkState::Isolated;
  tripped_at_ = now;
  ++trip_count_;

  std::ostringstream reason;
  reason << policy_.threshold << " watched events within " << policy_.window_ms
         << " ms; last=" << to_string(last_kind);
  trip_reason_ = reason.str();

  if (audit_)
    audit_->append(ThreatKind::BreakerTrip, now, "ids", trip_reason_);
  if (notifier_) {
    std::ostringstream line;
    line << "TRIP " << now << " " << trip_reason_;
    notifier_(line.str());
  }
}

LinkState TierBreaker::observe(const ThreatEvent& event) {
  std::lock_guard<std::mutex> lock(mu_);
  if (policy_.watched.count(event.kind) == 0) return state_;
  if (state_ == LinkState::Isolated) return state_;  // trips only once

  const Millis now = event.at;
  hits_.push_back(now);
  const Millis cutoff = now - policy_.window_ms;
  while (!hits_.empty() && hits_.front() <= cutoff) hits_.pop_front();

  if (static_cast<int>(hits_.size()) >= policy_.threshold)
    trip_locked(now, event.kind);
  return state_;
}

bool TierBreaker::admit_tier2(Millis now) {
  (void)now;
  std::lock_guard<std::mutex> lock(mu_);
  if (state_ == LinkState::Isolated) return false;
  ++tier2_ops_;
  return true;
}

std::optional<BreakerResetError> TierBreaker::reset(
    Millis now, const std::string& operator_id) {
  std::lock_guard<std::mutex> lock(mu_);
  if (state_ != LinkState::Isolated) return BreakerResetError::NotTripped;
  if (tripped_at_ && now < *tripped_at_ + policy_.reset_cooldown_ms) {
    return BreakerResetError::CooldownActive;
  }
  if (!authorizer_ || !authorizer_(operator_id)) {
    if (audit_)
      audit_->append(ThreatKind::PermissionDenied, now, operator_id,
                     "breaker reset refused");
    return BreakerResetError::PermissionDenied;
  }
  state_ = LinkState::Connected;
  tripped_at_.reset();
  trip_reason_.clear();
  hits_.clear();
  if (audit_)
    audit_->append(ThreatKind::AdminAction, now, operator_id, "breaker reset");
  return std::nullopt;
}

BreakerStatus TierBreaker::status() const {
  std::lock_guard<std::mutex> lock(mu_);
  return {state_, tripped_at_, trip_reason_, trip_count_};
}

LinkState TierBreaker::state() const {
  std::lock_guard<std::mutex> lock(mu_);
  return state_;
}

std::uint64_t TierBreaker::tier2_ops() const {
  std::lock_guard<std::mutex> lock(mu_);
  return tier2_ops_;
}

void TierBreaker::set_reset_authorizer(
    std::function<bool(const std::string&)> fn) {
  std::lock_guard<std::mutex> lock(mu_);
  authorizer_ = std::move(fn);
}

void TierBreaker::set_trip_notifier(std::function<void(const std::string&)> fn) {
  std::lock_guard<std::mutex> lock(mu_);
  notifier_ = std::move(fn);
}

}  // namespace sentinel
