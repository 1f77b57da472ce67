#include "sentinel/domain.hpp"

#include <atomic>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace sentinel {

namespace {

std::atomic<std::uint64_t> g_request_counter{0};

int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

// tchar per RFC 7230; header names outside this set are rejected.
bool is_header_name_char(char c) {
  if (std::isalnum(static_cast<unsigned char>(c))) return true;
  switch (c) {
    case '!': case '#': case '$': case '%': case '&': case '\'': case '*':
    case '+': case '-': case '.': case '^': case '_': case '`': case '|':
    case '~':
      return true;
    default:
      return false;
  }
}

bool percent_decode_once(std::string_view in, bool plus_to_space,
                         std::string* out, std::string* err) {
  out->clear();
  out->reserve(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    const char c = in[i];
    if (c == '%') {
      if (i + 2 >= in.size()) {
        *err = "truncated percent escape";
        return false;
      }
      const int hi = hex_digit(in[i + 1]);
      const int lo = hex_digit(in[i + 2]);
      if (hi < 0 || lo < 0) {
        *err = "invalid percent escape";
        return false;
      }
      out->push_back(static_cast<char>(hi << 4 | lo));
      i += 2;
    } else if (plus_to_space && c == '+') {
      out->push_back(' ');
    } else {
      out->push_back(c);
    }
  }
  return true;
}

// Resolve "." and ".." against a segment stack; rejects escapes above root.
bool resolve_segments(const std::string& decoded_path, std::string* out,
                      std::string* err) {
  std::vector<std::string> stack;
  std::size_t i = 1;  // skip leading '/'
  while (i <= decoded_path.size()) {
    const std::size_t next = decoded_path.find('/', i);
    const std::size_t end = next == std::string::npos ? decoded_path.size() : next;
    const std::string seg = decoded_path.substr(i, end - i);
    if (seg == "..") {
      if (stack.empty()) {
        *err = "path resolves above root";
        return false;
      }
      stack.pop_back();
    } else if (!seg.empty() && seg != ".") {
      stack.push_back(seg);
    }
    if (next == std::string::npos) break;
    i = next + 1;
  }
  out->clear();
  if (stack.empty()) {
    *out = "/";
    return true;
  }
  for (const auto& seg : stack) {
    out->push_back('/');
    out->append(seg);
  }
  return true;
}

}  // namespace

const char* to_string(Layer layer) {
  switch (layer) {
    case Layer::DosGuard: return "DosGuard";
    case Layer::Sanitizer: return "Sanitizer";
    case Layer::Ims: return "Ims";
    case Layer::RuleEngine: return "RuleEngine";
    case Layer::ActionFilter: return "ActionFilter";
    case Layer::Permission: return "Permission";
    case Layer::Breaker: return "Breaker";
  }
  return "?";
}

const char* to_string(ThreatKind kind) {
  switch (kind) {
    case ThreatKind::Forgery: return "Forgery";
    case ThreatKind::Replay: return "Replay";
    case ThreatKind::Expired: return "Expired";
    case ThreatKind::RuleMatch: return "RuleMatch";
    case ThreatKind::UnknownAction: return "UnknownAction";
    case ThreatKind::RateExceeded: return "RateExceeded";
    case ThreatKind::TamperedRecord: return "TamperedRecord";
    case ThreatKind::BreakerTrip: return "BreakerTrip";
    case ThreatKind::PermissionDenied: return "PermissionDenied";
    case ThreatKind::Sanitized: return "Sanitized";
    case ThreatKind::UpstreamFailure: return "UpstreamFailure";
    case ThreatKind::AdminAction: return "AdminAction";
    case ThreatKind::Denied: return "Denied";
  }
  return "?";
}

Verdict Verdict::allow(Layer layer, std::string reason, std::string detail) {
  Verdict v;
  v.decision = Decision::Allow;
  v.layer = layer;
  v.reason = std::move(reason);
  v.detail = std::move(detail);
  return v;
}

Verdict Verdict::deny(Layer layer, std::string reason, std::string detail) {
  Verdict v;
  v.decision = Decision::Deny;
  v.layer = layer;
  v.reason = std::move(reason);
  v.detail = std::move(detail);
  return v;
}

AuditLog::AuditLog(const std::string& mirror_path)
    : mirror_path_(mirror_path), mirror_enabled_(!mirror_path.empty()) {}

AppendOutcome AuditLog::append(ThreatEvent event) {
  std::lock_guard<std::mutex> lock(mu_);
  event.seq = next_seq_++;
  entries_.push_back(event);
  AppendOutcome outcome{event.seq, std::nullopt};
  if (mirror_enabled_) {
    std::ofstream out(mirror_path_, std::ios::app | std::ios::binary);
    if (out) {
      out << audit_line(event) << '\n';
      out.flush();
    }
    if (!out) {
      ++io_failures_;
      outcome.io_error = "audit mirror write failed: " + mirror_path_;
    }
  }
  return outcome;
}

AppendOutcome AuditLog::append(ThreatKind kind, Millis at, std::string source,
                               std::string detail) {
  ThreatEvent event;
  event.kind = kind;
  event.at = at;
  event.source = std::move(source);
  event.detail = std::move(detail);
  return append(std::move(event));
}

std::vector<ThreatEvent> AuditLog::snapshot() const {
  std::lock_guard<std::mutex> lock(mu_);
  return entries_;
}

std::optional<ThreatEvent> AuditLog::entry(std::uint64_t seq) const {
  std::lock_guard<std::mutex> lock(mu_);
  if (seq == 0 || seq > entries_.size()) return std::nullopt;
  return entries_[seq - 1];
}

std::uint64_t AuditLog::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return entries_.size();
}

std::uint64_t AuditLog::io_failures() const {
  std::lock_guard<std::mutex> lock(mu_);
  return io_failures_;
}

std::string audit_line(const ThreatEvent& event) {
  std::string detail;
  detail.reserve(event.detail.size());
  for (const char c : event.detail) {
    if (c == '\t') {
      detail += "\\t";
    } else if (c == '\n') {
      detail += "\\n";
    } else {
      detail.push_back(c);
    }
  }
  std::ostringstream out;
  out << event.seq << '\t' << event.at << '\t' << to_string(event.kind) << '\t'
      << event.source << '\t' << detail;
  return out.str();
}

CanonicalOutcome canonicalize_request(const RawRequest& raw, Millis now) {
  CanonicalOutcome outcome;
  auto fail = [&outcome](const std::string& why) -> CanonicalOutcome& {
    outcome.request.reset();
    outcome.error = "malformed request: " + why;
    return outcome;
  };

  if (raw.source.empty()) return fail("empty source");
  if (raw.path.empty()) return fail("empty path");

  std::string raw_path = raw.path;
  std::string raw_query;
  if (const auto q = raw.path.find('?'); q != std::string::npos) {
    raw_path = raw.path.substr(0, q);
    raw_query = raw.path.substr(q + 1);
  }
  if (raw_path.empty() || raw_path[0] != '/') return fail("path must be absolute");

  std::string err;
  std::string decoded_path;
  if (!percent_decode_once(raw_path, false, &decoded_path, &err)) {
    return fail(err + " in path");
  }
  Request req;
  if (!resolve_segments(decoded_path, &req.path, &err)) return fail(err);

  if (!raw_query.empty()) {
    std::size_t i = 0;
    while (i <= raw_query.size()) {
      const std::size_t amp = raw_query.find('&', i);
      const std::size_t end = amp == std::string::npos ? raw_query.size() : amp;
      const std::string part = raw_query.substr(i, end - i);
      if (!part.empty()) {
        const auto eq = part.find('=');
        const std::string raw_key =
            eq == std::string::npos ? part : part.substr(0, eq);
        const std::string raw_val =
            eq == std::string::npos ? "" : part.substr(eq + 1);
        std::string key, val;
        if (!percent_decode_once(raw_key, true, &key, &err)) {
          return fail(err + " in query");
        }
        if (!percent_decode_once(raw_val, true, &val, &err)) {
          return fail(err + " in query");
        }
        req.query.emplace_back(std::move(key), std::move(val));
      }
      if (amp == std::string::npos) break;
      i = amp + 1;
    }
  }

  for (const auto& [name, value] : raw.headers) {
    if (name.empty()) return fail("empty header name");
    std::string lower;
    lower.reserve(name.size());
    for (const char c : name) {
      if (!is_header_name_char(c)) return fail("invalid header name");
      lower.push_back(static_cast<char>(
          std::tolower(static_cast<unsigned char>(c))));
    }
    req.headers.emplace_back(std::move(lower), value);
  }

  // "/svc/<service>/<action>" with exactly three segments routes to a
  // business service; anything else leaves service/action empty and the
  // action filter denies it downstream.
  if (req.path.compare(0, 5, "/svc/") == 0) {
    const std::string rest = req.path.substr(5);
    const auto slash = rest.find('/');
    if (slash != std::string::npos && slash > 0 &&
        rest.find('/', slash + 1) == std::string::npos &&
        slash + 1 < rest.size()) {
      std::string service = rest.substr(0, slash);
      std::string action = rest.substr(slash + 1);
      for (auto& c : service) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      for (auto& c : action) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      req.service = std::move(service);
      req.action = std::move(action);
    }
  }

  char id_buf[32];
  std::snprintf(id_buf, sizeof(id_buf), "req-%012llu",
                static_cast<unsigned long long>(
                    g_request_counter.fetch_add(1, std::memory_order_relaxed) + 1));
  req.request_id = id_buf;
  req.source = raw.source;
  req.body = raw.body;
  req.certificate = raw.certificate;
  req.received_at = now;

  outcome.request = std::move(req);
  return outcome;
}

std::string url_encode(std::string_view text) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  out.reserve(text.size());
  for (const char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || c == '-' || c == '.' || c == '_' || c == '~') {
      out.push_back(c);
    } else {
      out.push_back('%');
      out.push_back(kHex[u >> 4]);
      out.push_back(kHex[u & 0xf]);
    }
  }
  return out;
}

}  // namespace sentinel
