#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sentinel/action_filter.hpp"
#include "sentinel/config.hpp"
#include "sentinel/dos_guard.hpp"
#include "sentinel/domain.hpp"
#include "sentinel/ids_breaker.hpp"
#include "sentinel/ims.hpp"
#include "sentinel/rng.hpp"
#include "sentinel/rule_engine.hpp"
#include "sentinel/sanitizer.hpp"
#include "sentinel/vault.hpp"

namespace sentinel {

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "text/plain";
};

enum class Binding { Public, Admin };

// Function-level grants: "<service>.<action>" -> principal classes allowed
// to call it. Anything unlisted is denied for everyone. Plain value type;
// the gateway serializes access.
class PermissionTable {
 public:
  static std::optional<PermissionTable> parse(std::string_view text,
                                              std::string* err);
  static std::optional<PermissionTable> load_file(const std::string& path,
                                                  std::string* err);

  bool allowed(const std::string& function,
               const std::set<std::string>& classes) const;
  // Granting adds `cls` to the function's set; revoking removes it and
  // drops the entry when the set empties (back to default-deny).
  void set(const std::string& function, const std::string& cls, bool allowed);
  std::string serialize() const;
  const std::map<std::string, std::set<std::string>>& entries() const {
    return grants_;
  }

 private:
  std::map<std::string, std::set<std::string>> grants_;
};

// Thrown by TierStore when the breaker is open; dispatch turns it into the
// 503 "tier-isolated" denial.
struct TierIsolatedError {};

enum class StoreStatus { Ok, NotFound, TamperedRecord, WrongKey, IoFailure };
const char* to_string(StoreStatus s);

// Handler-facing wrapper over breaker + vault: every operation passes the
// breaker gate first, so zero tier-2 operations run while Isolated.
class TierStore {
 public:
  TierStore(TierBreaker& breaker, Vault& vault, const VaultKey& key);

  struct GetResult {
    StoreStatus status = StoreStatus::IoFailure;
    std::vector<std::uint8_t> plaintext;
  };
  GetResult get(const std::string& record_key, Millis now);
  StoreStatus put(const std::string& record_key,
                  std::span<const std::uint8_t> plaintext, Millis now);

 private:
  TierBreaker& breaker_;
  Vault& vault_;
  VaultKey key_;
};

class Gateway;

struct CallContext {
  std::string subject;              // authenticated principal
  std::vector<std::string> scopes;
  std::set<std::string> classes;
  Binding binding = Binding::Public;
  Millis now = 0;
  Gateway* gateway = nullptr;
  TierStore* store = nullptr;  // null when no vault is configured
};

struct ServiceComponent {
  std::string name;
  std::set<std::string> actions;
  bool uses_tier2 = false;
  bool admin_only = false;
  std::function<Response(const Request&, CallContext&)> handler;
};

struct HandleResult {
  Response response;
  Verdict verdict;
  std::vector<Layer> invoked;       // layers entered, in order
  std::optional<Request> request;   // canonical form once built
};

struct GatewayWiring {
  SanitizationPolicy policy;
  RuleSet rules;
  RuleEvalOptions rule_opts;
  ActionRegistry registry;
  PermissionTable permissions;
  RateLimitConfig dos;
  DetectionPolicy detection;
  ImsOptions ims_opts;
  Key256 ims_key{};
  std::vector<ServiceComponent> services;
  std::map<std::string, std::set<std::string>> extra_classes;
  std::string vault_path;        // both set -> vault opened at create()
  std::optional<VaultKey> vault_key;
  std::string audit_mirror_path;
  std::string notify_path;       // breaker TRIP lines appended here
  std::string principals_path;   // persisted principal registry
  std::string permissions_path;  // persisted grants
};

// The one path to every business service: dos_guard -> canonicalize ->
// sanitize -> IMS validate -> rules -> action filter -> permission ->
// breaker-gated dispatch. First Deny wins and later layers never run;
// every Deny is audited; internal faults deny rather than allow.
class Gateway {
 public:
  static std::unique_ptr<Gateway> create(GatewayWiring wiring,
                                         RandomSource& rng, std::string* err);
  // Builds wiring (and mock service components) from a flat config file;
  // exposed separately so the evaluation harness can rebuild gateways
  // from one parsed profile.
  static std::optional<GatewayWiring> wiring_from_config(const Config& cfg,
                                                         std::string* err);
  static std::unique_ptr<Gateway> from_config(const Config& cfg,
                                              RandomSource& rng,
                                              std::string* err);

  HandleResult handle(const RawRequest& raw, Millis now,
                      Binding binding = Binding::Public);
  // Credential -> certificate exchange (path "/auth/login"); runs behind
  // the DoS guard but needs no certificate.
  HandleResult login(const RawRequest& raw, Millis now,
                     Binding binding = Binding::Public);

  // Admin operation; `operator_id` must hold class "admin".
  std::optional<std::string> set_permission(const std::string& function,
                                            const std::string& cls,
                                            bool allowed,
                                            const std::string& operator_id,
                                            Millis now);

  bool reload_rules(const std::string& path, std::string* err);
  bool reload_registry(const std::string& path, std::string* err);

  std::set<std::string> classes_of(const std::string& principal_id) const;
  bool save_principals(std::string* err) const;
  bool save_permissions(std::string* err) const;

  IdentityService& ims() { return *ims_; }
  AuditLog& audit() { return *audit_; }
  TierBreaker& breaker() { return *breaker_; }
  DosGuard& dos() { return *dos_; }
  Vault* vault() { return vault_ ? vault_->get() : nullptr; }
  PermissionTable permissions() const;
  std::shared_ptr<const RuleSet> rules() const;
  ActionRegistry registry_snapshot() const;

  std::uint64_t layer_invocations(Layer layer) const;
  void reset_layer_counters();

  // Test hook: makes the rule layer raise instead of evaluate, proving
  // the fail-closed property end to end.
  void set_rule_fault(bool on) { rule_fault_ = on; }

  // Audit + breaker feed for events raised outside the pipeline proper
  // (service handlers, admin operations).
  void report(ThreatKind kind, Millis at, const std::string& source,
              std::string detail);

 private:
  Gateway() = default;

  void emit(ThreatKind kind, Millis at, const std::string& source,
            std::string detail);
  Layer enter(Layer layer, HandleResult* hr);
  HandleResult refuse(HandleResult hr, Verdict verdict, int status,
                      const char* body, ThreatKind kind, Millis now,
                      const std::string& source, std::string detail);
  const ServiceComponent* find_service(const std::string& name) const;

  GatewayWiring wiring_;
  std::unique_ptr<AuditLog> audit_;
  std::unique_ptr<IdentityService> ims_;
  std::unique_ptr<DosGuard> dos_;
  std::unique_ptr<TierBreaker> breaker_;
  std::optional<std::unique_ptr<Vault>> vault_;
  std::unique_ptr<TierStore> store_;
  std::map<std::string, ServiceComponent> services_;

  mutable std::mutex swap_mu_;  // guards rules_/registry_/permissions_
  std::shared_ptr<const RuleSet> rules_;
  std::shared_ptr<const ActionRegistry> registry_;
  PermissionTable permissions_;

  std::array<std::atomic<std::uint64_t>, 7> layer_counts_{};
  std::atomic<bool> rule_fault_{false};
  std::atomic<std::uint64_t> housekeeping_tick_{0};
};

// Builds the bundled mock components (services module).
ServiceComponent make_trading_component(const std::set<std::string>& actions);
ServiceComponent make_contract_component(const std::set<std::string>& actions);
ServiceComponent make_banking_component(const std::set<std::string>& actions);
ServiceComponent make_echo_component(const std::string& name,
                                     const std::set<std::string>& actions);
ServiceComponent make_admin_component(const std::set<std::string>& actions);
ServiceComponent make_component_for(const std::string& name,
                                    const std::set<std::string>& actions);

std::vector<std::pair<std::string, std::string>> parse_form(
    std::string_view body);

}  // namespace sentinel
