#include "sentinel/ims.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "sentinel/encoding.hpp"

namespace sentinel {
namespace {

bool is_lower_hex(std::string_view s) {
  for (char c : s) {
    bool ok = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
    if (!ok) return false;
  }
  return true;
}

bool parse_millis(std::string_view s, Millis* out) {
  if (s.empty() || s.size() > 15) return false;
  Millis v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
    v = v * 10 + (c - '0');
  }
  *out = v;
  return true;
}

std::string join_scopes(const std::vector<std::string>& scopes) {
  std::string out;
  for (std::size_t i = 0; i < scopes.size(); ++i) {
    if (i) out.push_back(',');
    out += scopes[i];
  }
  return out;
}

}  // namespace

bool valid_principal_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  for (char c : id) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
              (c >= '0' && c <= '9') || c == '_' || c == '.' || c == '-';
    if (!ok) return false;
  }
  return true;
}

bool valid_scope_name(const std::string& s) {
  if (s.empty() || s.size() > 64) return false;
  for (char c : s) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
              (c >= '0' && c <= '9') || c == '_' || c == '.' || c == '-' ||
              c == ':';
    if (!ok) return false;
  }
  return true;
}

bool AuthCertificate::has_scope(const std::string& s) const {
  return std::find(scopes.begin(), scopes.end(), s) != scopes.end();
}

std::string certificate_payload(const AuthCertificate& cert) {
  std::ostringstream os;
  os << "v=1;sub=" << cert.subject << ";scope=" << join_scopes(cert.scopes)
     << ";iat=" << cert.issued_at << ";exp=" << cert.expires_at
     << ";nonce=" << cert.nonce_hex << ";su=" << (cert.single_use ? '1' : '0');
  return os.str();
}

std::string encode_certificate(const AuthCertificate& cert) {
  return base64_encode(certificate_payload(cert) + ";tag=" + cert.tag_hex);
}

const char* to_string(RegisterError e) {
  switch (e) {
    case RegisterError::DuplicateId: return "duplicate id";
    case RegisterError::WeakSecret: return "secret too short";
    case RegisterError::InvalidId: return "invalid id";
  }
  return "?";
}

const char* to_string(IssueError e) {
  switch (e) {
    case IssueError::AuthFailed: return "authentication failed";
    case IssueError::Disabled: return "principal disabled";
    case IssueError::BadRequest: return "bad issue request";
  }
  return "?";
}

const char* to_string(CertError e) {
  switch (e) {
    case CertError::Forged: return "forged";
    case CertError::Expired: return "expired";
    case CertError::Replayed: return "replayed";
  }
  return "?";
}

IdentityService::IdentityService(const Key256& signing_key, RandomSource& rng,
                                 ImsOptions opts)
    : signing_key_(signing_key), rng_(rng), opts_(opts) {}

std::optional<RegisterError> IdentityService::register_principal(
    const std::string& id, const std::string& secret, PrincipalKind kind) {
  if (!valid_principal_id(id)) return RegisterError::InvalidId;
  if (secret.size() < opts_.min_secret_len) return RegisterError::WeakSecret;
  std::lock_guard<std::mutex> lock(mu_);
  if (principals_.count(id)) return RegisterError::DuplicateId;

  Principal p;
  p.id = id;
  p.kind = kind;
  p.enabled = true;
  p.salt.resize(16);
  rng_.fill(std::span<std::uint8_t>(p.salt.data(), p.salt.size()));
  p.iterations = opts_.pbkdf2_iterations;
  p.secret_hash = pbkdf2_sha256(secret, p.salt,
                                static_cast<int>(p.iterations), 32);
  principals_.emplace(id, std::move(p));
  return std::nullopt;
}

bool IdentityService::set_enabled(const std::string& id, bool enabled) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = principals_.find(id);
  if (it == principals_.end()) return false;
  it->second.enabled = enabled;
  return true;
}

std::optional<Principal> IdentityService::find(const std::string& id) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = principals_.find(id);
  if (it == principals_.end()) return std::nullopt;
  return it->second;
}

std::vector<Principal> IdentityService::principals() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<Principal> out;
  out.reserve(principals_.size());
  for (const auto& kv : principals_) out.push_back(kv.second);
  return out;
}

bool IdentityService::verify_secret_locked(const Principal& p,
                                           const std::string& secret) const {
  std::vector<std::uint8_t> h = pbkdf2_sha256(
      secret, p.salt, static_cast<int>(p.iterations), p.secret_hash.size());
  return ct_equal(h, p.secret_hash);
}

IssueResult IdentityService::issue_locked(const Principal& p,
                                          const std::vector<std::string>& scopes,
                                          Millis now, Millis ttl_ms,
                                          bool single_use) {
  IssueResult out;
  if (ttl_ms <= 0) {
    out.error = IssueError::BadRequest;
    return out;
  }
  for (const std::string& s : scopes) {
    if (!valid_scope_name(s)) {
      out.error = IssueError::BadRequest;
      return out;
    }
  }

  AuthCertificate cert;
  cert.subject = p.id;
  cert.scopes = scopes;
  std::sort(cert.scopes.begin(), cert.scopes.end());
  cert.scopes.erase(std::unique(cert.scopes.begin(), cert.scopes.end()),
                    cert.scopes.end());
  cert.issued_at = now;
  cert.expires_at = now + ttl_ms;
  cert.single_use = single_use;
  do {
    cert.nonce_hex = rng_.hex(16);
  } while (ledger_.count(cert.nonce_hex));

  Hash256 mac = hmac_sha256(signing_key_, certificate_payload(cert));
  cert.tag_hex = to_hex(mac);

  ledger_[cert.nonce_hex] = LedgerEntry{cert.expires_at, single_use, false};
  out.encoded = encode_certificate(cert);
  out.cert = std::move(cert);
  return out;
}

IssueResult IdentityService::issue_certificate(
    const std::string& id, const std::string& secret,
    const std::vector<std::string>& scopes, Millis now, Millis ttl_ms,
    bool single_use) {
  std::lock_guard<std::mutex> lock(mu_);
  IssueResult out;
  auto it = principals_.find(id);
  // Unknown id and wrong secret are indistinguishable to the caller.
  if (it == principals_.end() || !verify_secret_locked(it->second, secret)) {
    out.error = IssueError::AuthFailed;
    return out;
  }
  if (!it->second.enabled) {
    out.error = IssueError::Disabled;
    return out;
  }
  return issue_locked(it->second, scopes, now, ttl_ms, single_use);
}

std::optional<AuthCertificate> IdentityService::decode_and_verify(
    std::string_view encoded, const Key256& key, Millis now,
    std::string* why) {
  auto fail = [&](const char* what) -> std::optional<AuthCertificate> {
    if (why) *why = what;
    return std::nullopt;
  };

  std::optional<std::vector<std::uint8_t>> raw = base64_decode(encoded);
  if (!raw) return fail("certificate is not canonical base64");
  std::string payload(raw->begin(), raw->end());

  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t semi = payload.find(';', start);
    if (semi == std::string::npos) {
      fields.push_back(payload.substr(start));
      break;
    }
    fields.push_back(payload.substr(start, semi - start));
    start = semi + 1;
  }
  if (fields.size() != 8) return fail("certificate has wrong field count");

  static const char* kPrefix[8] = {"v=",   "sub=",   "scope=", "iat=",
                                   "exp=", "nonce=", "su=",    "tag="};
  std::string value[8];
  for (int i = 0; i < 8; ++i) {
    std::size_t n = std::char_traits<char>::length(kPrefix[i]);
    if (fields[i].compare(0, n, kPrefix[i]) != 0)
      return fail("certificate field order is wrong");
    value[i] = fields[i].substr(n);
  }

  AuthCertificate cert;
  if (value[0] != "1") return fail("unsupported certificate version");
  cert.subject = value[1];
  if (!valid_principal_id(cert.subject)) return fail("bad subject");
  if (!value[2].empty()) {
    std::stringstream ss(value[2]);
    std::string scope;
    while (std::getline(ss, scope, ',')) {
      if (!valid_scope_name(scope)) return fail("bad scope name");
      cert.scopes.push_back(scope);
    }
  }
  if (!parse_millis(value[3], &cert.issued_at)) return fail("bad iat");
  if (!parse_millis(value[4], &cert.expires_at)) return fail("bad exp");
  if (cert.expires_at <= cert.issued_at)
    return fail("certificate lifetime is empty");
  cert.nonce_hex = value[5];
  if (cert.nonce_hex.size() != 32 || !is_lower_hex(cert.nonce_hex))
    return fail("bad nonce");
  if (value[6] != "0" && value[6] != "1") return fail("bad single-use flag");
  cert.single_use = value[6] == "1";
  cert.tag_hex = value[7];
  if (cert.tag_hex.size() != 64 || !is_lower_hex(cert.tag_hex))
    return fail("bad tag");

  // The tag is recomputed over the received bytes, not a re-serialization,
  // so any accepted-but-altered payload would need a matching MAC.
  std::size_t tag_at = payload.rfind(";tag=");
  Hash256 mac = hmac_sha256(key, payload.substr(0, tag_at));
  if (!ct_equal(to_hex(mac), cert.tag_hex)) return fail("tag does not verify");

  if (now >= cert.expires_at) return fail("certificate expired");
  return cert;
}

ValidationResult IdentityService::validate_certificate(std::string_view encoded,
                                                       Millis now) {
  ValidationResult out;

  std::string why;
  std::optional<AuthCertificate> cert =
      decode_and_verify(encoded, signing_key_, now, &why);
  if (!cert) {
    out.ok = false;
    out.error = why == "certificate expired" ? CertError::Expired
                                             : CertError::Forged;
    out.detail = why;
    return out;
  }

  std::lock_guard<std::mutex> lock(mu_);
  auto it = ledger_.find(cert->nonce_hex);
  if (it == ledger_.end()) {
    out.ok = false;
    out.error = CertError::Expired;
    out.detail = "nonce not in ledger";
    return out;
  }
  if (cert->single_use) {
    if (it->second.consumed) {
      out.ok = false;
      out.error = CertError::Replayed;
      out.detail = "single-use certificate presented again";
      return out;
    }
    it->second.consumed = true;
  }

  out.ok = true;
  out.subject = std::move(cert->subject);
  out.scopes = std::move(cert->scopes);
  out.single_use = cert->single_use;
  out.detail = "valid";
  return out;
}

std::optional<ServiceGrant> IdentityService::grant_service_link(
    const std::string& caller, const std::string& callee, Millis now,
    std::string* err) {
  std::lock_guard<std::mutex> lock(mu_);
  auto check = [&](const std::string& id) -> const Principal* {
    auto it = principals_.find(id);
    if (it == principals_.end()) {
      if (err) *err = "unknown principal \"" + id + "\"";
      return nullptr;
    }
    if (it->second.kind != PrincipalKind::Service) {
      if (err) *err = "\"" + id + "\" is not a service";
      return nullptr;
    }
    if (!it->second.enabled) {
      if (err) *err = "\"" + id + "\" is disabled";
      return nullptr;
    }
    return &it->second;
  };
  const Principal* from = check(caller);
  if (!from) return std::nullopt;
  if (!check(callee)) return std::nullopt;

  ServiceGrant grant;
  grant.caller = caller;
  grant.callee = callee;
  grant.scope = callee;  // scopes are service names the bearer may call
  IssueResult issued =
      issue_locked(*from, {grant.scope}, now, opts_.grant_ttl_ms, false);
  if (issued.error) {
    if (err) *err = to_string(*issued.error);
    return std::nullopt;
  }
  grant.cert = std::move(*issued.cert);
  grant.encoded = std::move(issued.encoded);
  return grant;
}

std::size_t IdentityService::purge_ledger(Millis now) {
  std::lock_guard<std::mutex> lock(mu_);
  std::size_t removed = 0;
  for (auto it = ledger_.begin(); it != ledger_.end();) {
    if (it->second.expires_at + opts_.ledger_grace_ms <= now) {
      it = ledger_.erase(it);
      ++removed;
    } else {
      ++it;
    }
  }
  return removed;
}

std::size_t IdentityService::ledger_size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return ledger_.size();
}

std::string IdentityService::serialize_principals() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::ostringstream os;
  for (const auto& kv : principals_) {
    const Principal& p = kv.second;
    os << p.id << '\t' << (p.kind == PrincipalKind::User ? "user" : "service")
       << '\t' << (p.enabled ? '1' : '0') << '\t' << p.iterations << '\t'
       << to_hex(p.salt) << '\t' << to_hex(p.secret_hash) << '\n';
  }
  return os.str();
}

bool IdentityService::save_principals(const std::string& path,
                                      std::string* err) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    if (err) *err = "cannot write " + path;
    return false;
  }
  out << serialize_principals();
  out.flush();
  if (!out) {
    if (err) *err = "write to " + path + " failed";
    return false;
  }
  return true;
}

bool IdentityService::load_principals(const std::string& path,
                                      std::string* err) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (err) *err = "cannot read " + path;
    return false;
  }
  std::map<std::string, Principal> loaded;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string part;
    while (std::getline(ss, part, '\t')) f.push_back(part);
    auto bad = [&](const std::string& what) {
      if (err)
        *err = path + ":" + std::to_string(lineno) + ": " + what;
      return false;
    };
    if (f.size() != 6) return bad("expected 6 tab-separated fields");
    Principal p;
    p.id = f[0];
    if (!valid_principal_id(p.id)) return bad("invalid principal id");
    if (f[1] == "user") {
      p.kind = PrincipalKind::User;
    } else if (f[1] == "service") {
      p.kind = PrincipalKind::Service;
    } else {
      return bad("kind must be user or service");
    }
    if (f[2] == "1") {
      p.enabled = true;
    } else if (f[2] == "0") {
      p.enabled = false;
    } else {
      return bad("enabled must be 0 or 1");
    }
    try {
      p.iterations = static_cast<std::uint32_t>(std::stoul(f[3]));
    } catch (const std::exception&) {
      return bad("bad iteration count");
    }
    if (p.iterations == 0) return bad("bad iteration count");
    std::optional<std::vector<std::uint8_t>> salt = from_hex(f[4]);
    std::optional<std::vector<std::uint8_t>> hash = from_hex(f[5]);
    if (!salt || salt->empty()) return bad("bad salt");
    if (!hash || hash->size() != 32) return bad("bad secret hash");
    p.salt = std::move(*salt);
    p.secret_hash = std::move(*hash);
    if (loaded.count(p.id)) return bad("duplicate principal id");
    loaded.emplace(p.id, std::move(p));
  }
  std::lock_guard<std::mutex> lock(mu_);
  principals_ = std::move(loaded);
  return true;
}

}  // namespace sentinel
