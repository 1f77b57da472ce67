#include "sentinel/dos_guard.hpp"

#include <algorithm>
#include <functional>

namespace sentinel {

DosGuard::DosGuard(RateLimitConfig cfg) : cfg_(cfg) {
  // Per-shard caps sum to at most max_tracked_sources, keeping the global
  // bound hard even with uneven hashing.
  per_shard_cap_ = std::max<std::size_t>(1, cfg_.max_tracked_sources / kShards);
}

DosGuard::Shard& DosGuard::shard_for(const std::string& source) {
  return shards_[std::hash<std::string>{}(source) % kShards];
}

const DosGuard::Shard& DosGuard::shard_for(const std::string& source) const {
  return shards_[std::hash<std::string>{}(source) % kShards];
}

bool DosGuard::evict_if_full(Shard& shard, Millis now) {
  if (shard.sources.size() < per_shard_cap_) return true;
  // Evict the least recently active source that is not under an active ban.
  auto victim = shard.sources.end();
  for (auto it = shard.sources.begin(); it != shard.sources.end(); ++it) {
    if (it->second.banned_until && *it->second.banned_until > now) continue;
    if (victim == shard.sources.end() ||
        it->second.last_activity < victim->second.last_activity)
      victim = it;
  }
  if (victim == shard.sources.end()) return false;
  shard.sources.erase(victim);
  return true;
}

DosGuard::Outcome DosGuard::record_and_check(const std::string& source,
                                             Millis now) {
  Shard& shard = shard_for(source);
  std::lock_guard<std::mutex> lock(shard.mu);

  auto it = shard.sources.find(source);
  if (it == shard.sources.end()) {
    if (!evict_if_full(shard, now)) {
      // Every slot holds an active ban: refuse rather than forget a ban
      // or grow without bound.
      return {Verdict::deny(Layer::DosGuard, "guard-full",
                            "tracking table exhausted by banned sources"),
              false};
    }
    it = shard.sources.emplace(source, SourceState{}).first;
  }
  SourceState& st = it->second;
  st.last_activity = now;

  if (st.banned_until) {
    if (*st.banned_until > now) {
      return {Verdict::deny(Layer::DosGuard, "banned",
                            "source banned until " +
                                std::to_string(*st.banned_until)),
              false};
    }
    st.banned_until.reset();
  }

  const Millis cutoff = now - cfg_.window_ms;
  while (!st.stamps.empty() && st.stamps.front() <= cutoff)
    st.stamps.pop_front();

  if (static_cast<int>(st.stamps.size()) + 1 > cfg_.max_requests) {
    st.banned_until = now + cfg_.ban_ms;
    st.stamps.clear();
    return {Verdict::deny(Layer::DosGuard, "rate-exceeded",
                          "more than " + std::to_string(cfg_.max_requests) +
                              " requests in " + std::to_string(cfg_.window_ms) +
                              " ms"),
            true};
  }
  st.stamps.push_back(now);
  return {Verdict::allow(Layer::DosGuard, "within-rate"), false};
}

std::size_t DosGuard::purge(Millis now) {
  std::size_t removed = 0;
  const Millis cutoff = now - cfg_.window_ms;
  for (Shard& shard : shards_) {
    std::lock_guard<std::mutex> lock(shard.mu);
    for (auto it = shard.sources.begin(); it != shard.sources.end();) {
      const SourceState& st = it->second;
      bool ban_active = st.banned_until && *st.banned_until > now;
      if (!ban_active && st.last_activity <= cutoff) {
        it = shard.sources.erase(it);
        ++removed;
      } else {
        ++it;
      }
    }
  }
  return removed;
}

std::size_t DosGuard::tracked_sources() const {
  std::size_t n = 0;
  for (const Shard& shard : shards_) {
    std::lock_guard<std::mutex> lock(shard.mu);
    n += shard.sources.size();
  }
  return n;
}

bool DosGuard::banned(const std::string& source, Millis now) const {
  const Shard& shard = shard_for(source);
  std::lock_guard<std::mutex> lock(shard.mu);
  auto it = shard.sources.find(source);
  if (it == shard.sources.end()) return false;
  return it->second.banned_until && *it->second.banned_until > now;
}

}  // namespace sentinel
