#include "sentinel/gateway.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "sentinel/encoding.hpp"

namespace sentinel {
namespace {

int layer_index(Layer layer) { return static_cast<int>(layer); }

bool valid_function_name(const std::string& fn) {
  if (fn.empty() || fn.size() > 129) return false;
  std::size_t dot = fn.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == fn.size())
    return false;
  for (char c : fn) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' ||
              c == '-' || c == '.';
    if (!ok) return false;
  }
  return fn.find('.', dot + 1) == std::string::npos;
}

bool valid_class_name(const std::string& cls) {
  if (cls.empty() || cls.size() > 32) return false;
  for (char c : cls) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' ||
              c == '-';
    if (!ok) return false;
  }
  return true;
}

// Lenient decode for login form bodies: valid escapes decode, anything
// else passes through. The strict pass lives in canonicalize_request.
std::string form_decode(std::string_view in) {
  std::string out;
  out.reserve(in.size());
  auto hexval = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  for (std::size_t i = 0; i < in.size(); ++i) {
    char c = in[i];
    if (c == '+') {
      out.push_back(' ');
    } else if (c == '%' && i + 2 < in.size()) {
      int hi = hexval(in[i + 1]), lo = hexval(in[i + 2]);
      if (hi >= 0 && lo >= 0) {
        out.push_back(static_cast<char>(hi * 16 + lo));
        i += 2;
      } else {
        out.push_back(c);
      }
    } else {
      out.push_back(c);
    }
  }
  return out;
}

std::optional<ThreatKind> threat_kind_from_name(const std::string& name) {
  static const std::pair<const char*, ThreatKind> kNames[] = {
      {"Forgery", ThreatKind::Forgery},
      {"Replay", ThreatKind::Replay},
      {"Expired", ThreatKind::Expired},
      {"RuleMatch", ThreatKind::RuleMatch},
      {"UnknownAction", ThreatKind::UnknownAction},
      {"RateExceeded", ThreatKind::RateExceeded},
      {"TamperedRecord", ThreatKind::TamperedRecord},
      {"BreakerTrip", ThreatKind::BreakerTrip},
      {"PermissionDenied", ThreatKind::PermissionDenied},
      {"Sanitized", ThreatKind::Sanitized},
      {"UpstreamFailure", ThreatKind::UpstreamFailure},
      {"AdminAction", ThreatKind::AdminAction},
      {"Denied", ThreatKind::Denied},
  };
  for (const auto& kv : kNames)
    if (name == kv.first) return kv.second;
  return std::nullopt;
}

}  // namespace

const char* to_string(StoreStatus s) {
  switch (s) {
    case StoreStatus::Ok: return "ok";
    case StoreStatus::NotFound: return "not-found";
    case StoreStatus::TamperedRecord: return "tampered-record";
    case StoreStatus::WrongKey: return "wrong-key";
    case StoreStatus::IoFailure: return "io-failure";
  }
  return "?";
}

std::vector<std::pair<std::string, std::string>> parse_form(
    std::string_view body) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t start = 0;
  while (start <= body.size()) {
    std::size_t amp = body.find('&', start);
    std::string_view pair = body.substr(
        start, amp == std::string_view::npos ? std::string_view::npos
                                             : amp - start);
    if (!pair.empty()) {
      std::size_t eq = pair.find('=');
      if (eq == std::string_view::npos) {
        out.emplace_back(form_decode(pair), "");
      } else {
        out.emplace_back(form_decode(pair.substr(0, eq)),
                         form_decode(pair.substr(eq + 1)));
      }
    }
    if (amp == std::string_view::npos) break;
    start = amp + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// PermissionTable

std::optional<PermissionTable> PermissionTable::parse(std::string_view text,
                                                      std::string* err) {
  PermissionTable table;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<std::string> words;
    std::string w;
    while (ls >> w) words.push_back(w);
    if (words.empty()) continue;
    if (words.size() < 2) {
      if (err)
        *err = "line " + std::to_string(lineno) +
               ": expected \"<service.action> <class>...\"";
      return std::nullopt;
    }
    if (!valid_function_name(words[0])) {
      if (err)
        *err = "line " + std::to_string(lineno) + ": bad function name \"" +
               words[0] + "\"";
      return std::nullopt;
    }
    for (std::size_t i = 1; i < words.size(); ++i) {
      if (!valid_class_name(words[i])) {
        if (err)
          *err = "line " + std::to_string(lineno) + ": bad class name \"" +
                 words[i] + "\"";
        return std::nullopt;
      }
      table.grants_[words[0]].insert(words[i]);
    }
  }
  return table;
}

std::optional<PermissionTable> PermissionTable::load_file(
    const std::string& path, std::string* err) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (err) *err = "cannot open " + path;
    return std::nullopt;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), err);
}

bool PermissionTable::allowed(const std::string& function,
                              const std::set<std::string>& classes) const {
  auto it = grants_.find(function);
  if (it == grants_.end()) return false;  // default-deny
  for (const std::string& cls : classes)
    if (it->second.count(cls)) return true;
  return false;
}

void PermissionTable::set(const std::string& function, const std::string& cls,
                          bool allowed) {
  if (allowed) {
    grants_[function].insert(cls);
    return;
  }
  auto it = grants_.find(function);
  if (it == grants_.end()) return;
  it->second.erase(cls);
  if (it->second.empty()) grants_.erase(it);
}

std::string PermissionTable::serialize() const {
  std::ostringstream os;
  for (const auto& kv : grants_) {
    os << kv.first;
    for (const std::string& cls : kv.second) os << ' ' << cls;
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// TierStore

TierStore::TierStore(TierBreaker& breaker, Vault& vault, const VaultKey& key)
    : breaker_(breaker), vault_(vault), key_(key) {}

TierStore::GetResult TierStore::get(const std::string& record_key, Millis now) {
  if (!breaker_.admit_tier2(now)) throw TierIsolatedError{};
  Vault::GetResult r = vault_.get(record_key, key_);
  GetResult out;
  out.plaintext = std::move(r.plaintext);
  switch (r.status) {
    case VaultStatus::Ok: out.status = StoreStatus::Ok; break;
    case VaultStatus::NotFound: out.status = StoreStatus::NotFound; break;
    case VaultStatus::TamperedRecord:
      out.status = StoreStatus::TamperedRecord;
      break;
    case VaultStatus::WrongKey: out.status = StoreStatus::WrongKey; break;
    case VaultStatus::IoFailure: out.status = StoreStatus::IoFailure; break;
  }
  return out;
}

StoreStatus TierStore::put(const std::string& record_key,
                           std::span<const std::uint8_t> plaintext,
                           Millis now) {
  if (!breaker_.admit_tier2(now)) throw TierIsolatedError{};
  switch (vault_.put(record_key, plaintext, key_)) {
    case VaultStatus::Ok: return StoreStatus::Ok;
    case VaultStatus::NotFound: return StoreStatus::NotFound;
    case VaultStatus::TamperedRecord: return StoreStatus::TamperedRecord;
    case VaultStatus::WrongKey: return StoreStatus::WrongKey;
    case VaultStatus::IoFailure: return StoreStatus::IoFailure;
  }
  return StoreStatus::IoFailure;
}

// ---------------------------------------------------------------------------
// Gateway

std::unique_ptr<Gateway> Gateway::create(GatewayWiring wiring,
                                         RandomSource& rng, std::string* err) {
  std::unique_ptr<Gateway> gw(new Gateway());
  gw->wiring_ = std::move(wiring);
  GatewayWiring& w = gw->wiring_;

  gw->audit_ = w.audit_mirror_path.empty()
                   ? std::make_unique<AuditLog>()
                   : std::make_unique<AuditLog>(w.audit_mirror_path);
  gw->ims_ = std::make_unique<IdentityService>(w.ims_key, rng, w.ims_opts);
  if (!w.principals_path.empty()) {
    std::ifstream probe(w.principals_path);
    if (probe.good()) {
      if (!gw->ims_->load_principals(w.principals_path, err)) return nullptr;
    }
  }
  gw->dos_ = std::make_unique<DosGuard>(w.dos);
  gw->breaker_ = std::make_unique<TierBreaker>(w.detection, gw->audit_.get());
  Gateway* raw_gw = gw.get();
  gw->breaker_->set_reset_authorizer([raw_gw](const std::string& op) {
    // Reset is a grant like any other: some class of the operator must
    // hold "breaker.reset" in the permission table.
    return raw_gw->permissions().allowed("breaker.reset",
                                         raw_gw->classes_of(op));
  });
  if (!w.notify_path.empty()) {
    std::string path = w.notify_path;
    gw->breaker_->set_trip_notifier([path](const std::string& line) {
      std::ofstream out(path, std::ios::app);
      out << line << '\n';
    });
  }

  if (w.vault_key.has_value() != !w.vault_path.empty()) {
    if (err) *err = "vault.key and vault.path must be configured together";
    return nullptr;
  }
  if (w.vault_key) {
    VaultStatus status;
    auto v = Vault::open(w.vault_path, *w.vault_key, rng, &status, err);
    if (!v) {
      if (err && err->empty()) *err = to_string(status);
      return nullptr;
    }
    gw->vault_ = std::move(*v);
    gw->store_ = std::make_unique<TierStore>(*gw->breaker_, **gw->vault_,
                                             *w.vault_key);
  }

  for (ServiceComponent& svc : w.services) {
    if (!svc.handler) {
      if (err) *err = "service \"" + svc.name + "\" has no handler";
      return nullptr;
    }
    if (svc.uses_tier2 && !gw->store_) {
      if (err)
        *err = "service \"" + svc.name + "\" needs the vault, which is not "
               "configured";
      return nullptr;
    }
    if (!gw->services_.emplace(svc.name, svc).second) {
      if (err) *err = "duplicate service \"" + svc.name + "\"";
      return nullptr;
    }
  }

  for (const auto& entry : w.registry.entries) {
    auto it = gw->services_.find(entry.first);
    if (it == gw->services_.end() ||
        it->second.actions.count(entry.second) == 0) {
      if (err)
        *err = "registry lists " + entry.first + "." + entry.second +
               " but no component provides it";
      return nullptr;
    }
  }

  gw->rules_ = std::make_shared<const RuleSet>(w.rules);
  gw->registry_ = std::make_shared<const ActionRegistry>(w.registry);
  gw->permissions_ = w.permissions;
  return gw;
}

std::optional<GatewayWiring> Gateway::wiring_from_config(const Config& cfg,
                                                         std::string* err) {
  GatewayWiring w;

  auto policy = parse_policy(
      cfg.get_str("sanitize.allowed", "alnum+\\s._-"),
      cfg.get_str("sanitize.strategy", "strip"),
      cfg.get_str("sanitize.case", "preserve"),
      cfg.get_str("sanitize.targets", "query,body"),
      cfg.get_bool("sanitize.report", true), err);
  if (!policy) return std::nullopt;
  w.policy = *policy;

  if (cfg.has("rules.path")) {
    RuleParseResult rr = load_rules_file(cfg.get_path("rules.path"));
    if (rr.error) {
      if (err) *err = "rules: " + rr.error->to_string();
      return std::nullopt;
    }
    w.rules = std::move(*rr.ruleset);
  }
  w.rule_opts.body_cap =
      static_cast<std::size_t>(cfg.get_i64("rules.body_cap", 1 << 20));

  if (cfg.has("registry.path")) {
    RegistryParseResult rr = load_registry_file(cfg.get_path("registry.path"));
    if (rr.error) {
      if (err)
        *err = "registry: line " + std::to_string(rr.error->line) + ": " +
               rr.error->message;
      return std::nullopt;
    }
    w.registry = std::move(*rr.registry);
  }

  if (cfg.has("permissions.path")) {
    w.permissions_path = cfg.get_path("permissions.path");
    std::ifstream probe(w.permissions_path);
    if (probe.good()) {
      auto table = PermissionTable::load_file(w.permissions_path, err);
      if (!table) return std::nullopt;
      w.permissions = *table;
    }
  }

  w.dos.max_requests =
      static_cast<int>(cfg.get_i64("dos.max_requests", w.dos.max_requests));
  w.dos.window_ms = cfg.get_i64("dos.window_ms", w.dos.window_ms);
  w.dos.ban_ms = cfg.get_i64("dos.ban_ms", w.dos.ban_ms);
  w.dos.max_tracked_sources = static_cast<std::size_t>(
      cfg.get_i64("dos.max_tracked", w.dos.max_tracked_sources));

  w.detection.threshold =
      static_cast<int>(cfg.get_i64("ids.threshold", w.detection.threshold));
  w.detection.window_ms = cfg.get_i64("ids.window_ms", w.detection.window_ms);
  w.detection.reset_cooldown_ms =
      cfg.get_i64("ids.cooldown_ms", w.detection.reset_cooldown_ms);
  if (cfg.has("ids.watched")) {
    w.detection.watched.clear();
    for (const std::string& name : cfg.get_list("ids.watched")) {
      auto kind = threat_kind_from_name(name);
      if (!kind) {
        if (err) *err = "ids.watched: unknown threat kind \"" + name + "\"";
        return std::nullopt;
      }
      w.detection.watched.insert(*kind);
    }
  }
  if (cfg.has("ids.notify")) w.notify_path = cfg.get_path("ids.notify");

  if (!cfg.has("ims.key")) {
    if (err) *err = "ims.key is required";
    return std::nullopt;
  }
  auto ims_key = load_key_file(cfg.get_path("ims.key"), err);
  if (!ims_key) return std::nullopt;
  w.ims_key = *ims_key;
  w.ims_opts.min_secret_len = static_cast<std::size_t>(
      cfg.get_i64("ims.min_secret_len", w.ims_opts.min_secret_len));
  w.ims_opts.pbkdf2_iterations = static_cast<std::uint32_t>(
      cfg.get_i64("ims.iterations", w.ims_opts.pbkdf2_iterations));
  w.ims_opts.default_ttl_ms =
      cfg.get_i64("ims.default_ttl_ms", w.ims_opts.default_ttl_ms);
  w.ims_opts.grant_ttl_ms =
      cfg.get_i64("ims.grant_ttl_ms", w.ims_opts.grant_ttl_ms);
  if (cfg.has("ims.principals"))
    w.principals_path = cfg.get_path("ims.principals");

  if (cfg.has("vault.key") != cfg.has("vault.path")) {
    if (err) *err = "vault.key and vault.path must be configured together";
    return std::nullopt;
  }
  if (cfg.has("vault.key")) {
    auto vk = VaultKey::load_file(cfg.get_path("vault.key"), err);
    if (!vk) return std::nullopt;
    w.vault_key = *vk;
    w.vault_path = cfg.get_path("vault.path");
  }

  if (cfg.has("audit.mirror")) w.audit_mirror_path = cfg.get_path("audit.mirror");

  for (const auto& kv : cfg.with_prefix("class.")) {
    std::set<std::string> classes;
    std::stringstream ss(kv.second);
    std::string cls;
    while (std::getline(ss, cls, ',')) {
      if (!cls.empty()) classes.insert(cls);
    }
    w.extra_classes[kv.first] = std::move(classes);
  }

  for (const auto& kv : cfg.with_prefix("services.")) {
    const std::string& key = kv.first;  // "<name>.actions"
    std::size_t dot = key.rfind(".actions");
    if (dot == std::string::npos || dot + 8 != key.size()) continue;
    std::string name = key.substr(0, dot);
    std::set<std::string> actions;
    std::stringstream ss(kv.second);
    std::string act;
    while (std::getline(ss, act, ',')) {
      if (!act.empty()) actions.insert(act);
    }
    w.services.push_back(make_component_for(name, actions));
  }

  return w;
}

std::unique_ptr<Gateway> Gateway::from_config(const Config& cfg,
                                              RandomSource& rng,
                                              std::string* err) {
  auto w = wiring_from_config(cfg, err);
  if (!w) return nullptr;
  return create(std::move(*w), rng, err);
}

void Gateway::emit(ThreatKind kind, Millis at, const std::string& source,
                   std::string detail) {
  ThreatEvent ev{0, at, kind, source, std::move(detail)};
  audit_->append(ev);
  breaker_->observe(ev);
}

void Gateway::report(ThreatKind kind, Millis at, const std::string& source,
                     std::string detail) {
  emit(kind, at, source, std::move(detail));
}

Layer Gateway::enter(Layer layer, HandleResult* hr) {
  layer_counts_[layer_index(layer)].fetch_add(1, std::memory_order_relaxed);
  hr->invoked.push_back(layer);
  return layer;
}

HandleResult Gateway::refuse(HandleResult hr, Verdict verdict, int status,
                             const char* body, ThreatKind kind, Millis now,
                             const std::string& source, std::string detail) {
  emit(kind, now, source, std::move(detail));
  hr.verdict = std::move(verdict);
  hr.response = Response{status, body, "text/plain"};
  return hr;
}

const ServiceComponent* Gateway::find_service(const std::string& name) const {
  auto it = services_.find(name);
  return it == services_.end() ? nullptr : &it->second;
}

HandleResult Gateway::handle(const RawRequest& raw, Millis now,
                             Binding binding) {
  HandleResult hr;

  // Opportunistic housekeeping, amortized across requests.
  if ((housekeeping_tick_.fetch_add(1, std::memory_order_relaxed) & 0xff) == 0) {
    ims_->purge_ledger(now);
    dos_->purge(now);
  }

  // 1. DoS guard -------------------------------------------------------
  enter(Layer::DosGuard, &hr);
  DosGuard::Outcome rate = dos_->record_and_check(raw.source, now);
  if (rate.verdict.denied()) {
    ThreatKind kind = rate.verdict.reason == "guard-full"
                          ? ThreatKind::Denied
                          : ThreatKind::RateExceeded;
    return refuse(std::move(hr), rate.verdict, 429, "too many requests", kind,
                  now, raw.source, rate.verdict.detail);
  }

  // 2. Canonicalize + sanitize ----------------------------------------
  enter(Layer::Sanitizer, &hr);
  CanonicalOutcome canon = canonicalize_request(raw, now);
  if (!canon.ok()) {
    return refuse(std::move(hr),
                  Verdict::deny(Layer::Sanitizer, "malformed-request",
                                canon.error),
                  400, "malformed request", ThreatKind::Denied, now,
                  raw.source, canon.error);
  }
  SanitizedRequest cleaned = sanitize_request(*canon.request, wiring_.policy);
  Request req = std::move(cleaned.request);
  hr.request = req;
  if (cleaned.total_removed > 0 && wiring_.policy.report) {
    emit(ThreatKind::Sanitized, now, req.source,
         "sanitizer removed " + std::to_string(cleaned.total_removed) +
             " characters (" + req.request_id + ")");
  }

  // 3. IMS certificate -------------------------------------------------
  enter(Layer::Ims, &hr);
  if (!req.certificate || req.certificate->empty()) {
    return refuse(std::move(hr),
                  Verdict::deny(Layer::Ims, "missing-certificate"),
                  401, "authentication failed", ThreatKind::Denied, now,
                  req.source, "no certificate presented");
  }
  ValidationResult val = ims_->validate_certificate(*req.certificate, now);
  if (!val.ok) {
    ThreatKind kind = ThreatKind::Forgery;
    std::string reason;
    switch (val.error) {
      case CertError::Forged:
        kind = ThreatKind::Forgery;
        reason = "forged";
        break;
      case CertError::Expired:
        kind = ThreatKind::Expired;
        reason = "expired";
        break;
      case CertError::Replayed:
        kind = ThreatKind::Replay;
        reason = "replayed";
        break;
    }
    return refuse(std::move(hr), Verdict::deny(Layer::Ims, reason, val.detail),
                  401, "authentication failed", kind, now, req.source,
                  val.detail);
  }
  if (!req.service.empty()) {
    bool in_scope = false;
    for (const std::string& s : val.scopes) {
      if (s == req.service) {
        in_scope = true;
        break;
      }
    }
    if (!in_scope) {
      return refuse(std::move(hr),
                    Verdict::deny(Layer::Ims, "scope",
                                  "certificate scope does not cover " +
                                      req.service),
                    401, "authentication failed", ThreatKind::Denied, now,
                    req.source,
                    "scope of " + val.subject + " does not cover " +
                        req.service);
    }
  }

  // 4. Rule engine -----------------------------------------------------
  enter(Layer::RuleEngine, &hr);
  std::shared_ptr<const RuleSet> rules = this->rules();
  MatchResult match;
  try {
    if (rule_fault_.load(std::memory_order_relaxed))
      throw std::runtime_error("injected rule engine fault");
    match = evaluate_rules(req, *rules, wiring_.rule_opts);
  } catch (const std::exception& e) {
    // Fail closed: an erroring layer denies, never allows.
    return refuse(std::move(hr),
                  Verdict::deny(Layer::RuleEngine, "internal-error", e.what()),
                  403, "request refused", ThreatKind::Denied, now, req.source,
                  std::string("rule engine error: ") + e.what());
  }
  for (const RuleLogHit& hit : match.log_hits) {
    emit(ThreatKind::RuleMatch, now, req.source,
         "log rule " + hit.rule_id + " severity " +
             std::to_string(hit.severity) + ": " + hit.excerpt);
  }
  if (match.verdict.denied()) {
    return refuse(std::move(hr), match.verdict, 403, "request refused",
                  ThreatKind::RuleMatch, now, req.source,
                  match.verdict.detail + ": " + match.excerpt);
  }

  // 5. Action filter ---------------------------------------------------
  enter(Layer::ActionFilter, &hr);
  std::shared_ptr<const ActionRegistry> registry;
  {
    std::lock_guard<std::mutex> lock(swap_mu_);
    registry = registry_;
  }
  Verdict action_verdict = check_action(req, *registry);
  if (action_verdict.denied()) {
    return refuse(std::move(hr), action_verdict, 403, "request refused",
                  ThreatKind::UnknownAction, now, req.source,
                  action_verdict.detail);
  }

  // 6. Permission ------------------------------------------------------
  enter(Layer::Permission, &hr);
  const ServiceComponent* svc = find_service(req.service);
  if (!svc) {
    return refuse(std::move(hr),
                  Verdict::deny(Layer::Permission, "unroutable",
                                "no component for " + req.service),
                  403, "request refused", ThreatKind::Denied, now, req.source,
                  "no component for " + req.service);
  }
  const std::string function = req.service + "." + req.action;
  if (svc->admin_only && binding != Binding::Admin) {
    return refuse(std::move(hr),
                  Verdict::deny(Layer::Permission, "permission",
                                function + " is not routable here"),
                  403, "request refused", ThreatKind::PermissionDenied, now,
                  req.source, function + " refused on public binding");
  }
  std::set<std::string> classes = classes_of(val.subject);
  bool permitted;
  {
    std::lock_guard<std::mutex> lock(swap_mu_);
    permitted = permissions_.allowed(function, classes);
  }
  if (!permitted) {
    return refuse(std::move(hr),
                  Verdict::deny(Layer::Permission, "permission",
                                function + " not granted"),
                  403, "request refused", ThreatKind::PermissionDenied, now,
                  req.source,
                  function + " denied for " + val.subject);
  }

  // 7. Breaker-gated dispatch -----------------------------------------
  if (svc->uses_tier2) {
    enter(Layer::Breaker, &hr);
    if (breaker_->state() == LinkState::Isolated) {
      return refuse(std::move(hr),
                    Verdict::deny(Layer::Breaker, "tier-isolated"),
                    503, "service temporarily unavailable",
                    ThreatKind::Denied, now, req.source,
                    "tier isolated; " + function + " refused");
    }
  }

  CallContext ctx;
  ctx.subject = val.subject;
  ctx.scopes = val.scopes;
  ctx.classes = std::move(classes);
  ctx.binding = binding;
  ctx.now = now;
  ctx.gateway = this;
  ctx.store = store_.get();
  try {
    hr.response = svc->handler(req, ctx);
    hr.verdict = Verdict::allow(hr.invoked.back(), "allowed", function);
  } catch (const TierIsolatedError&) {
    return refuse(std::move(hr),
                  Verdict::deny(Layer::Breaker, "tier-isolated"),
                  503, "service temporarily unavailable", ThreatKind::Denied,
                  now, req.source, "tier isolated during " + function);
  } catch (const std::exception& e) {
    emit(ThreatKind::UpstreamFailure, now, req.source,
         function + " handler failed: " + e.what());
    hr.response = Response{502, "upstream error", "text/plain"};
    hr.verdict = Verdict::allow(hr.invoked.back(), "upstream-failure",
                                function);
  } catch (...) {
    emit(ThreatKind::UpstreamFailure, now, req.source,
         function + " handler failed");
    hr.response = Response{502, "upstream error", "text/plain"};
    hr.verdict = Verdict::allow(hr.invoked.back(), "upstream-failure",
                                function);
  }
  return hr;
}

HandleResult Gateway::login(const RawRequest& raw, Millis now,
                            Binding binding) {
  (void)binding;
  HandleResult hr;
  enter(Layer::DosGuard, &hr);
  DosGuard::Outcome rate = dos_->record_and_check(raw.source, now);
  if (rate.verdict.denied()) {
    ThreatKind kind = rate.verdict.reason == "guard-full"
                          ? ThreatKind::Denied
                          : ThreatKind::RateExceeded;
    return refuse(std::move(hr), rate.verdict, 429, "too many requests", kind,
                  now, raw.source, rate.verdict.detail);
  }

  std::string id, secret, ttl_str, su_str;
  std::vector<std::string> scopes;
  for (const auto& kv : parse_form(raw.body)) {
    if (kv.first == "id") {
      id = kv.second;
    } else if (kv.first == "secret") {
      secret = kv.second;
    } else if (kv.first == "scope") {
      std::stringstream ss(kv.second);
      std::string s;
      while (std::getline(ss, s, ',')) {
        if (!s.empty()) scopes.push_back(s);
      }
    } else if (kv.first == "ttl_ms") {
      ttl_str = kv.second;
    } else if (kv.first == "single_use") {
      su_str = kv.second;
    }
  }
  Millis ttl = wiring_.ims_opts.default_ttl_ms;
  if (!ttl_str.empty()) {
    try {
      ttl = std::stoll(ttl_str);
    } catch (const std::exception&) {
      ttl = 0;  // rejected by issue as BadRequest
    }
  }
  bool single_use = su_str == "1" || su_str == "true";

  IssueResult issued =
      ims_->issue_certificate(id, secret, scopes, now, ttl, single_use);
  if (issued.error) {
    emit(ThreatKind::Denied, now, raw.source,
         "login for \"" + id + "\" failed: " + to_string(*issued.error));
    hr.verdict = Verdict::deny(Layer::Ims, "login-failed",
                               to_string(*issued.error));
    hr.response = Response{401, "authentication failed", "text/plain"};
    return hr;
  }
  hr.verdict = Verdict::allow(Layer::Ims, "issued");
  hr.response = Response{200, issued.encoded, "text/plain"};
  return hr;
}

std::optional<std::string> Gateway::set_permission(
    const std::string& function, const std::string& cls, bool allowed,
    const std::string& operator_id, Millis now) {
  if (classes_of(operator_id).count("admin") == 0) {
    emit(ThreatKind::PermissionDenied, now, operator_id,
         "set_permission refused: operator lacks admin class");
    return "operator is not an admin";
  }
  if (!valid_function_name(function)) return "bad function name";
  if (!valid_class_name(cls)) return "bad class name";
  {
    std::lock_guard<std::mutex> lock(swap_mu_);
    permissions_.set(function, cls, allowed);
  }
  emit(ThreatKind::AdminAction, now, operator_id,
       std::string(allowed ? "granted " : "revoked ") + function +
           (allowed ? " to " : " from ") + cls);
  if (!wiring_.permissions_path.empty()) {
    std::string err;
    if (!save_permissions(&err)) return "saved in memory only: " + err;
  }
  return std::nullopt;
}

bool Gateway::reload_rules(const std::string& path, std::string* err) {
  RuleParseResult rr = load_rules_file(path);
  if (rr.error) {
    if (err) *err = rr.error->to_string();
    return false;
  }
  auto fresh = std::make_shared<const RuleSet>(std::move(*rr.ruleset));
  std::lock_guard<std::mutex> lock(swap_mu_);
  rules_ = std::move(fresh);  // atomic swap; in-flight requests keep the old set
  return true;
}

bool Gateway::reload_registry(const std::string& path, std::string* err) {
  RegistryParseResult rr = load_registry_file(path);
  if (rr.error) {
    if (err)
      *err = "line " + std::to_string(rr.error->line) + ": " +
             rr.error->message;
    return false;
  }
  auto fresh = std::make_shared<const ActionRegistry>(std::move(*rr.registry));
  std::lock_guard<std::mutex> lock(swap_mu_);
  registry_ = std::move(fresh);
  return true;
}

std::set<std::string> Gateway::classes_of(
    const std::string& principal_id) const {
  std::set<std::string> out;
  std::optional<Principal> p = ims_->find(principal_id);
  if (p) out.insert(p->kind == PrincipalKind::User ? "user" : "service");
  auto it = wiring_.extra_classes.find(principal_id);
  if (it != wiring_.extra_classes.end())
    out.insert(it->second.begin(), it->second.end());
  return out;
}

bool Gateway::save_principals(std::string* err) const {
  if (wiring_.principals_path.empty()) {
    if (err) *err = "no principals path configured";
    return false;
  }
  return ims_->save_principals(wiring_.principals_path, err);
}

bool Gateway::save_permissions(std::string* err) const {
  if (wiring_.permissions_path.empty()) {
    if (err) *err = "no permissions path configured";
    return false;
  }
  std::string text;
  {
    std::lock_guard<std::mutex> lock(swap_mu_);
    text = permissions_.serialize();
  }
  std::ofstream out(wiring_.permissions_path,
                    std::ios::binary | std::ios::trunc);
  if (!out) {
    if (err) *err = "cannot write " + wiring_.permissions_path;
    return false;
  }
  out << text;
  out.flush();
  return static_cast<bool>(out);
}

PermissionTable Gateway::permissions() const {
  std::lock_guard<std::mutex> lock(swap_mu_);
  return permissions_;
}

std::shared_ptr<const RuleSet> Gateway::rules() const {
  std::lock_guard<std::mutex> lock(swap_mu_);
  return rules_;
}

ActionRegistry Gateway::registry_snapshot() const {
  std::lock_guard<std::mutex> lock(swap_mu_);
  return *registry_;
}

std::uint64_t Gateway::layer_invocations(Layer layer) const {
  return layer_counts_[layer_index(layer)].load(std::memory_order_relaxed);
}

void Gateway::reset_layer_counters() {
  for (auto& c : layer_counts_) c.store(0, std::memory_order_relaxed);
}

}  // namespace sentinel
