// Operator entry point: run the gateway, validate config artifacts, manage
// principals and permissions over the loopback admin binding, and drive the
// evaluation harness. Exit codes: 0 ok, 1 failure, 2 usage.

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "httplib.h"
#include "sentinel/clock.hpp"
#include "sentinel/config.hpp"
#include "sentinel/gateway.hpp"
#include "sentinel/harness.hpp"
#include "sentinel/rng.hpp"
#include "sentinel/server.hpp"

namespace {

using namespace sentinel;

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop.store(true); }

int fail(const std::string& msg) {
  std::cerr << "sentinel: " << msg << "\n";
  return 1;
}

int usage_error(const std::string& msg) {
  std::cerr << "sentinel: " << msg << "\n";
  return 2;
}

std::optional<Config> load_config(const std::string& path, std::string* err) {
  if (path.empty()) {
    *err = "no configuration given (use --config or set SENTINEL_CONFIG)";
    return std::nullopt;
  }
  return Config::load_file(path, err);
}

// ---------------------------------------------------------------------------
// Admin channel: login at the loopback binding, then call admin functions
// with the issued certificate. Mutations never touch local files directly.
// ---------------------------------------------------------------------------

struct AdminOpts {
  std::string operator_id;
  std::string secret;
  std::string addr;  // overrides listen.admin
};

std::string form_encode(
    const std::vector<std::pair<std::string, std::string>>& fields) {
  std::string out;
  for (const auto& kv : fields) {
    if (!out.empty()) out += '&';
    out += url_encode(kv.first) + "=" + url_encode(kv.second);
  }
  return out;
}

// Returns the response body; non-2xx statuses are reported via *err.
std::optional<std::string> admin_call(
    const Config& cfg, const AdminOpts& opts, const std::string& action,
    const std::vector<std::pair<std::string, std::string>>& fields,
    std::string* err) {
  std::string addr = opts.addr.empty()
                         ? cfg.get_str("listen.admin", "127.0.0.1:8081")
                         : opts.addr;
  std::string host;
  int port = 0;
  if (!split_hostport(addr, &host, &port)) {
    *err = "bad admin address \"" + addr + "\"";
    return std::nullopt;
  }
  httplib::Client client(host, port);
  client.set_connection_timeout(3, 0);
  client.set_read_timeout(10, 0);

  auto login = client.Post(
      "/auth/login",
      form_encode({{"id", opts.operator_id},
                   {"secret", opts.secret},
                   {"scope", "admin"},
                   {"ttl_ms", "60000"}}),
      "application/x-www-form-urlencoded");
  if (!login) {
    *err = "cannot reach admin binding at " + addr +
           " (is `sentinel serve` running?)";
    return std::nullopt;
  }
  if (login->status != 200) {
    *err = "login failed (" + std::to_string(login->status) + "): " +
           login->body;
    return std::nullopt;
  }

  httplib::Headers headers = {{"x-ims-cert", login->body}};
  auto res = client.Post("/svc/admin/" + action, headers, form_encode(fields),
                         "application/x-www-form-urlencoded");
  if (!res) {
    *err = "admin call failed: connection lost";
    return std::nullopt;
  }
  if (res->status < 200 || res->status >= 300) {
    *err = "admin." + action + " refused (" + std::to_string(res->status) +
           "): " + res->body;
    return std::nullopt;
  }
  return res->body;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_serve(const std::string& config_path) {
  std::string err;
  auto cfg = load_config(config_path, &err);
  if (!cfg) return fail(err);

  // Fail closed: nothing listens unless every artifact validates.
  SystemRandom rng;
  auto gw = Gateway::from_config(*cfg, rng, &err);
  if (!gw) return fail("configuration rejected: " + err);

  SystemClock clock;
  GatewayServer server(*gw, clock);
  std::string public_addr = cfg->get_str("listen.public", "127.0.0.1:8080");
  std::string admin_addr = cfg->get_str("listen.admin", "");
  if (!server.start(public_addr, admin_addr, &err)) return fail(err);

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "public binding on " << public_addr << " (port "
            << server.public_port() << ")\n";
  if (!admin_addr.empty())
    std::cout << "admin binding on " << admin_addr << " (port "
              << server.admin_port() << ")\n";
  while (!g_stop.load())
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
  server.stop();
  return 0;
}

int cmd_check_rules(const std::string& config_path, std::string path) {
  std::string err;
  if (path.empty()) {
    auto cfg = load_config(config_path, &err);
    if (!cfg) return usage_error(err + " (or pass a rule file directly)");
    path = cfg->get_path("rules.path");
    if (path.empty()) return fail("config has no rules.path");
  }
  RuleParseResult rr = load_rules_file(path);
  if (rr.error) {
    std::cerr << path << ": " << rr.error->to_string() << "\n";
    return 1;
  }
  std::cout << "ok: " << rr.ruleset->rules.size() << " rules, version "
            << rr.ruleset->version.substr(0, 12) << "\n";
  return 0;
}

int cmd_check_registry(const std::string& config_path, std::string path) {
  std::string err;
  if (path.empty()) {
    auto cfg = load_config(config_path, &err);
    if (!cfg) return usage_error(err + " (or pass a registry file directly)");
    path = cfg->get_path("registry.path");
    if (path.empty()) return fail("config has no registry.path");
  }
  RegistryParseResult rr = load_registry_file(path);
  if (rr.error) {
    std::cerr << path << ": line " << rr.error->line << ": "
              << rr.error->message << "\n";
    return 1;
  }
  std::cout << "ok: " << rr.registry->entries.size() << " functions across "
            << rr.registry->services().size() << " services\n";
  return 0;
}

std::optional<std::vector<std::string>> load_payload_file(
    const std::string& path, std::string* err) {
  std::ifstream in(path);
  if (!in) {
    *err = "cannot read payload file " + path;
    return std::nullopt;
  }
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    out.push_back(line);
  }
  if (out.empty()) {
    *err = "payload file " + path + " has no entries";
    return std::nullopt;
  }
  return out;
}

struct EvalArgs {
  std::uint64_t seed = 7;
  int n = 100;
  std::string scenario;  // empty = all
  bool assert_rates = false;
  bool machine = false;
  bool concurrent = false;
};

int assert_rates(const EvaluationReport& report, int dos_budget) {
  int misses = 0;
  auto miss = [&](const ScenarioReport& s, const std::string& expect) {
    std::cerr << "assert: " << s.name << " expected " << expect << ", got "
              << s.denied << "/" << s.sent << " denied\n";
    ++misses;
  };
  for (const auto& s : report.scenarios) {
    if (s.name == "forged-cert" || s.name == "tampered-cert" ||
        s.name == "injection-payload" || s.name == "unknown-action") {
      if (s.denied != s.sent) miss(s, "every request denied");
    } else if (s.name == "replayed-cert" ||
               s.name == "replayed-cert-concurrent") {
      if (s.allowed != 1) miss(s, "exactly one success");
    } else if (s.name == "flood") {
      if (s.allowed > dos_budget)
        miss(s, "allowed <= " + std::to_string(dos_budget));
    } else if (s.name == "benign") {
      if (s.denied != 0) miss(s, "zero false positives");
    }
  }
  return misses;
}

int cmd_eval(const std::string& config_path, const EvalArgs& args) {
  std::string err;
  auto cfg = load_config(config_path, &err);
  if (!cfg) return usage_error(err);
  auto wiring = Gateway::wiring_from_config(*cfg, &err);
  if (!wiring) return fail("configuration rejected: " + err);

  EvalSetup setup;
  setup.wiring = std::move(*wiring);
  setup.seed = args.seed;
  setup.n = args.n;
  setup.concurrent_replay = args.concurrent;
  if (!args.scenario.empty()) {
    auto kind = scenario_from_name(args.scenario);
    if (!kind) return usage_error("unknown scenario \"" + args.scenario + "\"");
    setup.kinds = {*kind};
  }
  if (cfg->has("eval.payloads")) {
    auto payloads = load_payload_file(cfg->get_path("eval.payloads"), &err);
    if (!payloads) return fail(err);
    setup.payloads = std::move(*payloads);
  }

  auto report = run_evaluation(setup, &err);
  if (!report) return fail(err);
  std::cout << (args.machine ? report->to_machine() : report->to_text());
  if (args.assert_rates &&
      assert_rates(*report, setup.wiring.dos.max_requests) > 0)
    return 1;
  return 0;
}

int cmd_reset_breaker(const std::string& config_path, const AdminOpts& opts) {
  std::string err;
  auto cfg = load_config(config_path, &err);
  if (!cfg) return usage_error(err);
  auto body = admin_call(*cfg, opts, "reset_breaker", {}, &err);
  if (!body) return fail(err);
  std::cout << *body;
  return 0;
}

int cmd_user_add(const std::string& config_path, const AdminOpts& opts,
                 const std::string& id, const std::string& secret,
                 const std::string& kind) {
  std::string err;
  auto cfg = load_config(config_path, &err);
  if (!cfg) return usage_error(err);
  auto body = admin_call(
      *cfg, opts, "user_add",
      {{"id", id}, {"secret", secret}, {"kind", kind}}, &err);
  if (!body) return fail(err);
  std::cout << *body;
  return 0;
}

int cmd_user_disable(const std::string& config_path, const AdminOpts& opts,
                     const std::string& id) {
  std::string err;
  auto cfg = load_config(config_path, &err);
  if (!cfg) return usage_error(err);
  auto body = admin_call(*cfg, opts, "user_disable", {{"id", id}}, &err);
  if (!body) return fail(err);
  std::cout << *body;
  return 0;
}

int cmd_grant_link(const std::string& config_path, const AdminOpts& opts,
                   const std::string& caller, const std::string& callee) {
  std::string err;
  auto cfg = load_config(config_path, &err);
  if (!cfg) return usage_error(err);
  auto body = admin_call(*cfg, opts, "grant_link",
                         {{"caller", caller}, {"callee", callee}}, &err);
  if (!body) return fail(err);
  std::cout << *body;
  return 0;
}

int cmd_permit(const std::string& config_path, const AdminOpts& opts,
               const std::string& function, const std::string& cls,
               bool revoke) {
  std::string err;
  auto cfg = load_config(config_path, &err);
  if (!cfg) return usage_error(err);
  auto body = admin_call(*cfg, opts, "permit",
                         {{"function", function},
                          {"class", cls},
                          {"allow", revoke ? "0" : "1"}},
                         &err);
  if (!body) return fail(err);
  std::cout << *body;
  return 0;
}

void add_admin_opts(CLI::App* sub, AdminOpts* opts) {
  sub->add_option("--operator", opts->operator_id,
                  "principal performing the operation")
      ->required();
  sub->add_option("--secret", opts->secret, "operator secret")
      ->envname("SENTINEL_OPERATOR_SECRET")
      ->required();
  sub->add_option("--admin-addr", opts->addr,
                  "admin binding address (default from listen.admin)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"layered security gateway for service-oriented e-commerce"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config,-c", config_path, "configuration file")
      ->envname("SENTINEL_CONFIG");

  auto* serve = app.add_subcommand("serve", "run the gateway until signalled");

  std::string rules_arg;
  auto* check_rules =
      app.add_subcommand("check-rules", "validate a rule file");
  check_rules->add_option("path", rules_arg,
                          "rule file (default: rules.path from config)");

  std::string registry_arg;
  auto* check_registry =
      app.add_subcommand("check-registry", "validate an action registry");
  check_registry->add_option(
      "path", registry_arg, "registry file (default: registry.path from config)");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "run the evaluation harness");
  eval->add_option("--seed", eval_args.seed, "evaluation seed");
  eval->add_option("--n", eval_args.n, "requests per scenario")
      ->check(CLI::PositiveNumber);
  eval->add_option("--scenario", eval_args.scenario,
                   "run one scenario (default: all)");
  eval->add_flag("--assert", eval_args.assert_rates,
                 "exit 1 unless every scenario meets its expected rate");
  eval->add_flag("--machine", eval_args.machine,
                 "tab-separated output instead of the table");
  eval->add_flag("--concurrent-replay", eval_args.concurrent,
                 "add a threaded single-use replay pass");

  AdminOpts reset_opts;
  auto* reset = app.add_subcommand("reset-breaker",
                                   "reset the tier-2 circuit breaker");
  add_admin_opts(reset, &reset_opts);

  auto* user = app.add_subcommand("user", "principal management");
  user->require_subcommand(1);
  AdminOpts user_opts;
  std::string user_id, user_secret, user_kind = "user";
  auto* user_add = user->add_subcommand("add", "register a principal");
  add_admin_opts(user_add, &user_opts);
  user_add->add_option("--id", user_id, "principal id")->required();
  user_add->add_option("--user-secret", user_secret,
                       "secret for the new principal")
      ->required();
  user_add->add_option("--kind", user_kind, "user|service")
      ->check(CLI::IsMember({"user", "service"}));
  auto* user_disable = user->add_subcommand("disable", "disable a principal");
  add_admin_opts(user_disable, &user_opts);
  user_disable->add_option("--id", user_id, "principal id")->required();

  AdminOpts grant_opts;
  std::string caller, callee;
  auto* grant = app.add_subcommand(
      "grant-link", "issue a service-to-service certificate");
  add_admin_opts(grant, &grant_opts);
  grant->add_option("--caller", caller, "calling service")->required();
  grant->add_option("--callee", callee, "called service")->required();

  AdminOpts permit_opts;
  std::string function, cls;
  bool revoke = false;
  auto* permit = app.add_subcommand("permit", "grant or revoke a function");
  add_admin_opts(permit, &permit_opts);
  permit->add_option("--function", function, "function, e.g. trading.get_quote")
      ->required();
  permit->add_option("--class", cls, "principal class")->required();
  permit->add_flag("--revoke", revoke, "revoke instead of grant");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();
  user_add->fallthrough();
  user_disable->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (serve->parsed()) return cmd_serve(config_path);
  if (check_rules->parsed()) return cmd_check_rules(config_path, rules_arg);
  if (check_registry->parsed())
    return cmd_check_registry(config_path, registry_arg);
  if (eval->parsed()) return cmd_eval(config_path, eval_args);
  if (reset->parsed()) return cmd_reset_breaker(config_path, reset_opts);
  if (user->parsed()) {
    if (user_add->parsed())
      return cmd_user_add(config_path, user_opts, user_id, user_secret,
                          user_kind);
    return cmd_user_disable(config_path, user_opts, user_id);
  }
  if (grant->parsed())
    return cmd_grant_link(config_path, grant_opts, caller, callee);
  if (permit->parsed())
    return cmd_permit(config_path, permit_opts, function, cls, revoke);
  return 2;
}
