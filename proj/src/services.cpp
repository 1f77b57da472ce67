#include <cstdio>
#include <sstream>

#include "sentinel/gateway.hpp"

// Bundled mock service components. They stand in for the business tier the
// gateway fronts; handlers echo enough of the request back to make
// end-to-end assertions possible.

namespace sentinel {
namespace {

std::string param(const Request& req, const std::string& key,
                  const std::string& fallback = "") {
  for (const auto& kv : req.query)
    if (kv.first == key) return kv.second;
  for (const auto& kv : parse_form(req.body))
    if (kv.first == key) return kv.second;
  return fallback;
}

Response text(int status, std::string body) {
  return Response{status, std::move(body), "text/plain"};
}

// Deterministic fake quote so repeated eval runs stay byte-identical.
std::string quote_for(const std::string& symbol) {
  std::uint32_t h = 2166136261u;
  for (char c : symbol) {
    h ^= static_cast<unsigned char>(c);
    h *= 16777619u;
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s %u.%02u", symbol.c_str(),
                50 + h % 450, h % 100);
  return buf;
}

}  // namespace

ServiceComponent make_trading_component(const std::set<std::string>& actions) {
  ServiceComponent svc;
  svc.name = "trading";
  svc.actions = actions;
  svc.handler = [](const Request& req, CallContext&) -> Response {
    if (req.action == "list_quotes")
      return text(200, quote_for("AUR") + "\n" + quote_for("BRN") + "\n" +
                           quote_for("COB") + "\n");
    if (req.action == "get_quote") {
      std::string symbol = param(req, "symbol", "AUR");
      return text(200, quote_for(symbol) + "\n");
    }
    return text(200, "trading." + req.action + " ok\n");
  };
  return svc;
}

ServiceComponent make_contract_component(const std::set<std::string>& actions) {
  ServiceComponent svc;
  svc.name = "contract";
  svc.actions = actions;
  svc.handler = [](const Request& req, CallContext&) -> Response {
    if (req.action == "list_contracts")
      return text(200, "c-1001 active\nc-1002 active\nc-1003 closed\n");
    if (req.action == "get_contract") {
      std::string id = param(req, "id", "c-1001");
      return text(200, id + " active\n");
    }
    return text(200, "contract." + req.action + " ok\n");
  };
  return svc;
}

ServiceComponent make_banking_component(const std::set<std::string>& actions) {
  ServiceComponent svc;
  svc.name = "banking";
  svc.actions = actions;
  svc.uses_tier2 = true;
  svc.handler = [](const Request& req, CallContext& ctx) -> Response {
    if (!ctx.store) return text(500, "store unavailable");
    std::string account = param(req, "account");
    if (account.empty()) return text(400, "account required");
    const std::string record_key = "acct:" + account;

    auto read_balance = [&](long long* out) -> std::optional<Response> {
      TierStore::GetResult r = ctx.store->get(record_key, ctx.now);
      if (r.status == StoreStatus::NotFound) {
        *out = 0;
        return std::nullopt;
      }
      if (r.status != StoreStatus::Ok) {
        if (r.status == StoreStatus::TamperedRecord && ctx.gateway) {
          ctx.gateway->report(ThreatKind::TamperedRecord, ctx.now, req.source,
                              "stored record " + record_key +
                                  " failed integrity check");
        }
        return text(500, "record unavailable");
      }
      std::string s(r.plaintext.begin(), r.plaintext.end());
      try {
        *out = std::stoll(s);
      } catch (const std::exception&) {
        *out = 0;
      }
      return std::nullopt;
    };

    if (req.action == "balance") {
      long long balance = 0;
      if (auto early = read_balance(&balance)) return *early;
      return text(200, account + " " + std::to_string(balance) + "\n");
    }
    if (req.action == "deposit") {
      long long amount = 0;
      try {
        amount = std::stoll(param(req, "amount", "0"));
      } catch (const std::exception&) {
        return text(400, "bad amount");
      }
      if (amount <= 0) return text(400, "bad amount");
      long long balance = 0;
      if (auto early = read_balance(&balance)) return *early;
      balance += amount;
      std::string value = std::to_string(balance);
      StoreStatus st = ctx.store->put(
          record_key,
          std::span<const std::uint8_t>(
              reinterpret_cast<const std::uint8_t*>(value.data()),
              value.size()),
          ctx.now);
      if (st != StoreStatus::Ok) return text(500, "write failed");
      return text(200, account + " " + value + "\n");
    }
    return text(200, "banking." + req.action + " ok\n");
  };
  return svc;
}

ServiceComponent make_echo_component(const std::string& name,
                                     const std::set<std::string>& actions) {
  ServiceComponent svc;
  svc.name = name;
  svc.actions = actions;
  svc.handler = [](const Request& req, CallContext&) -> Response {
    std::ostringstream os;
    os << req.service << "." << req.action << "\n";
    for (const auto& kv : req.query)
      os << "query " << kv.first << "=" << kv.second << "\n";
    if (!req.body.empty()) os << "body " << req.body << "\n";
    return text(200, os.str());
  };
  return svc;
}

ServiceComponent make_admin_component(const std::set<std::string>& actions) {
  ServiceComponent svc;
  svc.name = "admin";
  svc.actions = actions;
  svc.admin_only = true;
  svc.handler = [](const Request& req, CallContext& ctx) -> Response {
    Gateway* gw = ctx.gateway;
    if (!gw) return text(500, "gateway unavailable");

    if (req.action == "reset_breaker") {
      auto err = gw->breaker().reset(ctx.now, ctx.subject);
      if (err) return text(409, to_string(*err));
      return text(200, "connected\n");
    }

    if (req.action == "permit") {
      std::string function = param(req, "function");
      std::string cls = param(req, "class");
      bool allow = param(req, "allow", "1") != "0";
      auto err = gw->set_permission(function, cls, allow, ctx.subject, ctx.now);
      if (err) return text(400, *err);
      return text(200, "ok\n");
    }

    if (req.action == "user_add") {
      std::string id = param(req, "id");
      std::string secret = param(req, "secret");
      PrincipalKind kind = param(req, "kind", "user") == "service"
                               ? PrincipalKind::Service
                               : PrincipalKind::User;
      auto err = gw->ims().register_principal(id, secret, kind);
      if (err) return text(400, to_string(*err));
      gw->report(ThreatKind::AdminAction, ctx.now, ctx.subject,
                 "registered principal \"" + id + "\"");
      std::string save_err;
      if (!gw->save_principals(&save_err) &&
          save_err != "no principals path configured")
        return text(500, save_err);
      return text(200, "registered " + id + "\n");
    }

    if (req.action == "user_disable") {
      std::string id = param(req, "id");
      if (!gw->ims().set_enabled(id, false))
        return text(404, "unknown principal");
      gw->report(ThreatKind::AdminAction, ctx.now, ctx.subject,
                 "disabled principal \"" + id + "\"");
      std::string save_err;
      if (!gw->save_principals(&save_err) &&
          save_err != "no principals path configured")
        return text(500, save_err);
      return text(200, "disabled " + id + "\n");
    }

    if (req.action == "grant_link") {
      std::string caller = param(req, "caller");
      std::string callee = param(req, "callee");
      std::string err;
      auto grant = gw->ims().grant_service_link(caller, callee, ctx.now, &err);
      if (!grant) return text(400, err);
      gw->report(ThreatKind::AdminAction, ctx.now, ctx.subject,
                 "granted service link " + caller + " -> " + callee);
      return text(200, grant->encoded + "\n");
    }

    return text(200, "admin." + req.action + " ok\n");
  };
  return svc;
}

ServiceComponent make_component_for(const std::string& name,
                                    const std::set<std::string>& actions) {
  if (name == "trading") return make_trading_component(actions);
  if (name == "contract") return make_contract_component(actions);
  if (name == "banking") return make_banking_component(actions);
  if (name == "admin") return make_admin_component(actions);
  return make_echo_component(name, actions);
}

}  // namespace sentinel
