#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sentinel/clock.hpp"

namespace sentinel {

// ---------------------------------------------------------------------------
// Verdicts
// ---------------------------------------------------------------------------

enum class Decision { Allow, Deny };

// Pipeline layers in fixed execution order. Canonicalization failures are
// attributed to Sanitizer (the input-normalization stage); Breaker appears
// only when a dispatched handler touches the data tier.
enum class Layer {
  DosGuard,
  Sanitizer,
  Ims,
  RuleEngine,
  ActionFilter,
  Permission,
  Breaker,
};

const char* to_string(Layer layer);

struct Verdict {
  Decision decision = Decision::Allow;
  Layer layer = Layer::DosGuard;
  std::string reason;                  // machine-readable code
  std::string detail;                  // human-readable
  std::optional<std::string> rule_id;  // set iff layer=RuleEngine and Deny

  static Verdict allow(Layer layer, std::string reason, std::string detail = "");
  static Verdict deny(Layer layer, std::string reason, std::string detail = "");
  bool allowed() const { return decision == Decision::Allow; }
  bool denied() const { return decision == Decision::Deny; }
};

// ---------------------------------------------------------------------------
// Threat events and audit log
// ---------------------------------------------------------------------------

enum class ThreatKind {
  Forgery,
  Replay,
  Expired,
  RuleMatch,
  UnknownAction,
  RateExceeded,
  TamperedRecord,
  BreakerTrip,
  PermissionDenied,
  Sanitized,
  UpstreamFailure,
  AdminAction,
  // Catch-all for denials with no dedicated kind above (malformed input,
  // missing certificate, scope mismatch, isolated tier, internal faults);
  // every pipeline denial is audited under some kind.
  Denied,
};

const char* to_string(ThreatKind kind);

struct ThreatEvent {
  std::uint64_t seq = 0;  // assigned by the audit log
  Millis at = 0;
  ThreatKind kind = ThreatKind::Forgery;
  std::string source;
  std::string detail;

  bool operator==(const ThreatEvent&) const = default;
};

struct AppendOutcome {
  std::uint64_t seq = 0;
  // Set when file mirroring is enabled and the write failed. The
  // in-memory append has still happened.
  std::optional<std::string> io_error;
};

// Append-only, linearizable sequence assignment. Optionally mirrors each
// event to a tab-separated line file (see audit_line()).
class AuditLog {
 public:
  AuditLog() = default;
  explicit AuditLog(const std::string& mirror_path);

  AppendOutcome append(ThreatEvent event);
  AppendOutcome append(ThreatKind kind, Millis at, std::string source,
                       std::string detail);

  std::vector<ThreatEvent> snapshot() const;
  std::optional<ThreatEvent> entry(std::uint64_t seq) const;
  std::uint64_t size() const;
  std::uint64_t io_failures() const;

 private:
  mutable std::mutex mu_;
  std::vector<ThreatEvent> entries_;
  std::uint64_t next_seq_ = 1;
  std::uint64_t io_failures_ = 0;
  std::string mirror_path_;
  bool mirror_enabled_ = false;
};

// One event as a mirror-file line: seq, at, kind, source, detail separated
// by tabs; tabs and newlines inside detail become "\t" / "\n".
std::string audit_line(const ThreatEvent& event);

// ---------------------------------------------------------------------------
// Requests
// ---------------------------------------------------------------------------

// What the wire (or the harness) hands the gateway. Deliberately carries
// no timestamp or id, so identical resubmissions are byte-identical.
struct RawRequest {
  std::string source;  // client address, e.g. "203.0.113.9:4411"
  std::string path;    // raw request target, may include "?query"
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
  std::optional<std::string> certificate;

  bool operator==(const RawRequest&) const = default;
};

/// Canonical request: percent-escapes decoded exactly once, dot segments
// resolved, header names lowercased. Immutable once built; every pipeline
// layer sees this form.
struct Request {
  std::string request_id;
  std::string source;
  std::string service;  // from "/svc/<service>/<action>", else empty
  std::string action;
  std::string path;  // canonical, query stripped
  std::vector<std::pair<std::string, std::string>> headers;
  std::vector<std::pair<std::string, std::string>> query;
  std::string body;
  std::optional<std::string> certificate;
  Millis received_at = 0;

  bool operator==(const Request&) const = default;
};

struct CanonicalOutcome {
  std::optional<Request> request;
  std::string error;  // set iff !request; "malformed request: ..."
  bool ok() const { return request.has_value(); }
};

/// Single decode pass: a '%' must start a valid escape. '+' becomes a
// space in query keys/values only. ".." popping past the root and
// malformed header names are rejected.
CanonicalOutcome canonicalize_request(const RawRequest& raw, Millis now);

// Percent-encode for building raw query strings (unreserved chars pass).
std::string url_encode(std::string_view text);

}  // namespace sentinel
