#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sentinel/clock.hpp"
#include "sentinel/crypto.hpp"
#include "sentinel/rng.hpp"

namespace sentinel {

enum class PrincipalKind { User, Service };

struct Principal {
  std::string id;
  PrincipalKind kind = PrincipalKind::User;
  bool enabled = true;
  std::vector<std::uint8_t> salt;
  std::uint32_t iterations = 0;
  std::vector<std::uint8_t> secret_hash;  // PBKDF2-HMAC-SHA256
};

// Signed, expiring capability. The wire format is base64 of
//   v=1;sub=<id>;scope=<a,b>;iat=<ms>;exp=<ms>;nonce=<32hex>;su=<0|1>;tag=<64hex>
// where tag is HMAC-SHA256 over everything before ";tag=". Scopes are
// sorted; nonce and tag are lowercase hex. The decoder accepts exactly
// this shape, so any single-bit change to an encoded certificate either
// breaks the syntax or breaks the tag.
struct AuthCertificate {
  std::string subject;
  std::vector<std::string> scopes;  // sorted, unique
  Millis issued_at = 0;
  Millis expires_at = 0;
  std::string nonce_hex;  // 32 lowercase hex chars
  bool single_use = false;
  std::string tag_hex;    // 64 lowercase hex chars

  bool has_scope(const std::string& s) const;
};

std::string certificate_payload(const AuthCertificate& cert);  // without tag
std::string encode_certificate(const AuthCertificate& cert);

enum class RegisterError { DuplicateId, WeakSecret, InvalidId };
enum class IssueError { AuthFailed, Disabled, BadRequest };
enum class CertError { Forged, Expired, Replayed };

const char* to_string(RegisterError e);
const char* to_string(IssueError e);
const char* to_string(CertError e);

struct IssueResult {
  std::optional<AuthCertificate> cert;
  std::string encoded;
  std::optional<IssueError> error;
};

struct ValidationResult {
  bool ok = false;
  CertError error = CertError::Forged;  // meaningful when !ok
  std::string detail;
  // Filled on success:
  std::string subject;
  std::vector<std::string> scopes;
  bool single_use = false;
};

struct ServiceGrant {
  std::string caller;
  std::string callee;
  std::string scope;  // callee service name
  AuthCertificate cert;
  std::string encoded;
};

struct ImsOptions {
  std::size_t min_secret_len = 8;
  std::uint32_t pbkdf2_iterations = 10'000;
  Millis default_ttl_ms = 15 * 60'000;
  Millis grant_ttl_ms = 60 * 60'000;
  Millis ledger_grace_ms = 60'000;  // nonce retained past expiry
};

// Identity management: principal registry, certificate issuance and
// validation, and the nonce ledger that makes single-use certificates
// single-use. Validation consumes a single-use nonce atomically, so under
// concurrent presentation exactly one caller wins.
class IdentityService {
 public:
  IdentityService(const Key256& signing_key, RandomSource& rng,
                  ImsOptions opts = {});

  std::optional<RegisterError> register_principal(const std::string& id,
                                                  const std::string& secret,
                                                  PrincipalKind kind);
  bool set_enabled(const std::string& id, bool enabled);
  std::optional<Principal> find(const std::string& id) const;
  std::vector<Principal> principals() const;

  IssueResult issue_certificate(const std::string& id,
                                const std::string& secret,
                                const std::vector<std::string>& scopes,
                                Millis now, Millis ttl_ms, bool single_use);

  // Strict decode, tag check, expiry check, ledger check. Consumes the
  // nonce when the certificate is single-use and valid.
  ValidationResult validate_certificate(std::string_view encoded, Millis now);

  // Structural half of validation: syntax + tag + expiry, no ledger and
  // no state change. What a verifier holding only the key can conclude.
  static std::optional<AuthCertificate> decode_and_verify(
      std::string_view encoded, const Key256& key, Millis now,
      std::string* why);

  // Issues a service-to-service certificate letting caller reach callee
  // (scope = callee). Both principals must exist and be enabled services.
  std::optional<ServiceGrant> grant_service_link(const std::string& caller,
                                                 const std::string& callee,
                                                 Millis now, std::string* err);

  // Drops ledger entries expired for longer than the grace period.
  std::size_t purge_ledger(Millis now);
  std::size_t ledger_size() const;

  std::string serialize_principals() const;
  bool save_principals(const std::string& path, std::string* err) const;
  bool load_principals(const std::string& path, std::string* err);

  const ImsOptions& options() const { return opts_; }

 private:
  struct LedgerEntry {
    Millis expires_at = 0;
    bool single_use = false;
    bool consumed = false;
  };

  bool verify_secret_locked(const Principal& p, const std::string& secret) const;
  IssueResult issue_locked(const Principal& p,
                           const std::vector<std::string>& scopes, Millis now,
                           Millis ttl_ms, bool single_use);

  Key256 signing_key_;
  RandomSource& rng_;
  ImsOptions opts_;

  mutable std::mutex mu_;
  std::map<std::string, Principal> principals_;
  std::map<std::string, LedgerEntry> ledger_;  // nonce_hex -> entry
};

bool valid_principal_id(const std::string& id);
bool valid_scope_name(const std::string& s);

}  // namespace sentinel
