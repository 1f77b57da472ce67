#include "sentinel/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <mutex>
#include <sstream>
#include <thread>
#include <utility>

#include "sentinel/encoding.hpp"

namespace sentinel {
namespace {

constexpr Millis kT0 = 1'700'000'000'000;  // fixed evaluation epoch
constexpr const char* kEvalUser = "eval-user";
constexpr const char* kEvalSecret = "correct-horse-battery";

struct ScenarioName {
  ScenarioKind kind;
  const char* name;
};
constexpr ScenarioName kNames[kScenarioCount] = {
    {ScenarioKind::ForgedCert, "forged-cert"},
    {ScenarioKind::ReplayedCert, "replayed-cert"},
    {ScenarioKind::TamperedCert, "tampered-cert"},
    {ScenarioKind::InjectionPayload, "injection-payload"},
    {ScenarioKind::UnknownAction, "unknown-action"},
    {ScenarioKind::Flood, "flood"},
    {ScenarioKind::Benign, "benign"},
};

std::string fmt_rate(double r) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", r);
  return buf;
}

// Distinct client address per index so no scenario except the flood ever
// concentrates traffic on one source.
std::string spread_source(int i) {
  return "198.51.100." + std::to_string(1 + i % 200) + ":" +
         std::to_string(2000 + i / 200);
}

RawRequest make_raw(std::string source, const std::string& service,
                    const std::string& action, const std::string& raw_query,
                    std::string body, std::optional<std::string> cert) {
  RawRequest raw;
  raw.source = std::move(source);
  raw.path = "/svc/" + service + "/" + action;
  if (!raw_query.empty()) raw.path += "?" + raw_query;
  raw.headers = {{"host", "gw.local"}};
  raw.body = std::move(body);
  raw.certificate = std::move(cert);
  return raw;
}

std::string flip_bits(const std::string& text, int count, RandomSource& rng) {
  std::string out = text;
  for (int k = 0; k < std::max(1, count); ++k) {
    std::size_t pos = rng.next_u64() % out.size();
    int bit = static_cast<int>(rng.next_u64() % 8);
    out[pos] = static_cast<char>(out[pos] ^ (1 << bit));
  }
  return out;
}

std::string random_b64(RandomSource& rng) {
  std::size_t n = 40 + rng.next_u64() % 80;
  std::vector<std::uint8_t> bytes(n);
  rng.fill(bytes);
  return base64_encode(bytes);
}

// Everything the per-entry oracles consult, snapshotted once per corpus.
struct OracleCtx {
  Key256 key{};
  SanitizationPolicy policy;
  std::shared_ptr<const RuleSet> rules;
  ActionRegistry registry;
  PermissionTable perms;
  std::set<std::string> caller_classes;
};

// True when the request would clear every non-DoS layer except possibly the
// action filter: certificate verifies structurally, canonicalization
// succeeds, the sanitizer changes nothing, no deny rule fires, and (when
// `expect_registered`) the action exists and the caller's classes hold the
// grant. With `expect_registered` false the action must be absent, pinning
// any denial on the action filter alone.
bool content_clean(const OracleCtx& ctx, const RawRequest& raw, Millis at,
                   bool expect_registered, std::string* why) {
  if (!raw.certificate) {
    if (why) *why = "entry carries no certificate";
    return false;
  }
  std::string cert_why;
  auto cert = IdentityService::decode_and_verify(*raw.certificate, ctx.key, at,
                                                 &cert_why);
  if (!cert) {
    if (why) *why = "certificate does not verify: " + cert_why;
    return false;
  }
  CanonicalOutcome canon = canonicalize_request(raw, at);
  if (!canon.ok()) {
    if (why) *why = "canonicalization failed: " + canon.error;
    return false;
  }
  if (!cert->has_scope(canon.request->service)) {
    if (why) *why = "certificate scope omits " + canon.request->service;
    return false;
  }
  SanitizedRequest cleaned = sanitize_request(*canon.request, ctx.policy);
  if (cleaned.total_removed != 0) {
    if (why) *why = "sanitizer alters the entry";
    return false;
  }
  MatchResult mr = evaluate_rules(cleaned.request, *ctx.rules);
  if (mr.verdict.denied()) {
    if (why)
      *why = "deny rule " + mr.matched_rule.value_or("?") + " fires";
    return false;
  }
  const Request& req = cleaned.request;
  bool registered = ctx.registry.contains(req.service, req.action);
  if (registered != expect_registered) {
    if (why)
      *why = req.service + "." + req.action +
             (registered ? " is registered" : " is not registered");
    return false;
  }
  if (expect_registered &&
      !ctx.perms.allowed(req.service + "." + req.action, ctx.caller_classes)) {
    if (why)
      *why = "class set lacks a grant for " + req.service + "." + req.action;
    return false;
  }
  return true;
}

std::optional<std::string> issue_cert(Gateway& gw,
                                      const std::vector<std::string>& scopes,
                                      Millis now, Millis ttl, bool single_use,
                                      std::string* err) {
  IssueResult r = gw.ims().issue_certificate(kEvalUser, kEvalSecret, scopes,
                                             now, ttl, single_use);
  if (r.error) {
    if (err)
      *err = std::string("issuing evaluation certificate: ") +
             to_string(*r.error);
    return std::nullopt;
  }
  return r.encoded;
}

std::uint64_t mix_seed(std::uint64_t base, int index) {
  return base * 1'000'003ULL + static_cast<std::uint64_t>(index) * 7'919ULL +
         1;
}

}  // namespace

const char* to_string(ScenarioKind k) {
  for (const auto& e : kNames)
    if (e.kind == k) return e.name;
  return "?";
}

std::optional<ScenarioKind> scenario_from_name(const std::string& name) {
  for (const auto& e : kNames)
    if (name == e.name) return e.kind;
  return std::nullopt;
}

std::vector<ScenarioKind> all_scenarios() {
  std::vector<ScenarioKind> out;
  out.reserve(kScenarioCount);
  for (const auto& e : kNames) out.push_back(e.kind);
  return out;
}

const std::vector<std::string>& builtin_payloads() {
  static const std::vector<std::string> kPayloads = {
      "<script>alert(1)</script>",
      "<img src=x onerror=alert(1)>",
      "javascript:alert(document.cookie)",
      "' OR '1'='1",
      "1; DROP TABLE accounts --",
      "UNION SELECT secret FROM credentials",
      "../../etc/passwd",
      "..%2f..%2fetc%2fshadow",
      "/proc/self/environ",
      "php://filter/convert.base64-encode",
      "() { :; }; /bin/id",
      "%3Cscript%3Edocument.location%3D'http://x'%3C/script%3E",
  };
  return kPayloads;
}

std::optional<Corpus> generate_corpus(const AttackScenario& scenario, int n,
                                      Gateway& gw, const Key256& ims_key,
                                      Millis t0, RandomSource& rng,
                                      const SanitizationPolicy& policy,
                                      std::string* err) {
  if (n < 1) {
    if (err) *err = "corpus size must be at least 1";
    return std::nullopt;
  }

  OracleCtx ctx;
  ctx.key = ims_key;
  ctx.policy = policy;
  ctx.rules = gw.rules();
  ctx.registry = gw.registry_snapshot();
  ctx.perms = gw.permissions();
  ctx.caller_classes = gw.classes_of(kEvalUser);

  // Deterministic order for "pick the i-th registered function".
  std::vector<std::pair<std::string, std::string>> pairs(
      ctx.registry.entries.begin(), ctx.registry.entries.end());
  if (pairs.empty()) {
    if (err) *err = "action registry is empty; no corpus can be built";
    return std::nullopt;
  }
  std::set<std::string> svc_set = ctx.registry.services();
  std::vector<std::string> scopes(svc_set.begin(), svc_set.end());

  // Replay pacing keeps one source under the rate budget: two window
  // lengths spread across a budget's worth of requests.
  const RateLimitConfig& dosc = gw.dos().config();
  const Millis replay_step = std::max<Millis>(
      1, 2 * dosc.window_ms / std::max(1, dosc.max_requests));
  const Millis ttl =
      static_cast<Millis>(n) * std::max<Millis>(replay_step, 50) + 600'000;

  auto fail = [&](int i, const std::string& why) {
    if (err)
      *err = std::string(to_string(scenario.kind)) + " entry " +
             std::to_string(i) + " rejected by the soundness oracle: " + why;
    return std::nullopt;
  };

  Corpus corpus;
  switch (scenario.kind) {
    case ScenarioKind::ForgedCert: {
      // Even entries: a genuine certificate with flipped bits. Odd
      // entries: well-formed base64 that never saw the signing key.
      for (int i = 0; i < n; ++i) {
        const Millis at = t0 + static_cast<Millis>(i) * 50;
        std::string bad;
        if (i % 2 == 0) {
          auto good = issue_cert(gw, scopes, t0, ttl, false, err);
          if (!good) return std::nullopt;
          bool broke = false;
          for (int attempt = 0; attempt < 10 && !broke; ++attempt) {
            bad = flip_bits(*good, scenario.params.bit_flip_count, rng);
            std::string why;
            broke = !IdentityService::decode_and_verify(bad, ctx.key, at,
                                                        &why)
                         .has_value();
          }
          if (!broke)
            return fail(i, "bit flips kept producing a verifiable token");
        } else {
          bad = random_b64(rng);
          std::string why;
          if (IdentityService::decode_and_verify(bad, ctx.key, at, &why))
            return fail(i, "random token unexpectedly verifies");
        }
        const auto& sa = pairs[i % pairs.size()];
        corpus.entries.push_back(
            {make_raw(spread_source(i), sa.first, sa.second, "", "", bad),
             at});
      }
      corpus.cert_note = "bit-flipped and unsigned tokens";
      break;
    }

    case ScenarioKind::ReplayedCert: {
      auto once = issue_cert(gw, scopes, t0, ttl, true, err);
      if (!once) return std::nullopt;
      std::string why;
      if (!IdentityService::decode_and_verify(*once, ctx.key, t0, &why))
        return fail(0, "single-use certificate fails verification: " + why);
      const auto& sa = pairs.front();
      for (int i = 0; i < n; ++i) {
        const Millis at = t0 + static_cast<Millis>(i) * replay_step;
        RawRequest raw = make_raw("203.0.113.77:4000", sa.first, sa.second,
                                  "", "", *once);
        if (i == 0 && !content_clean(ctx, raw, at, true, &why))
          return fail(0, why);
        corpus.entries.push_back({std::move(raw), at});
      }
      corpus.cert_note = "one single-use certificate, presented " +
                         std::to_string(n) + " times";
      break;
    }

    case ScenarioKind::TamperedCert: {
      for (int i = 0; i < n; ++i) {
        const Millis at = t0 + static_cast<Millis>(i) * 50;
        IssueResult r = gw.ims().issue_certificate(kEvalUser, kEvalSecret,
                                                   scopes, t0, ttl, false);
        if (r.error) {
          if (err)
            *err = std::string("issuing evaluation certificate: ") +
                   to_string(*r.error);
          return std::nullopt;
        }
        std::string why;
        if (!IdentityService::decode_and_verify(r.encoded, ctx.key, at, &why))
          return fail(i, "base certificate fails verification: " + why);

        // Rewrite one claim but keep the original tag: structurally a
        // certificate, cryptographically a lie.
        AuthCertificate doctored = *r.cert;
        switch (i % 4) {
          case 0: doctored.subject = "intruder"; break;
          case 1: doctored.expires_at += 3'600'000; break;
          case 2: doctored.scopes = {"vault"}; break;
          default: doctored.single_use = !doctored.single_use; break;
        }
        std::string bad = encode_certificate(doctored);
        if (IdentityService::decode_and_verify(bad, ctx.key, at, &why))
          return fail(i, "doctored certificate still verifies");
        const auto& sa = pairs[i % pairs.size()];
        corpus.entries.push_back(
            {make_raw(spread_source(i), sa.first, sa.second, "", "", bad),
             at});
      }
      corpus.cert_note = "genuine certificates with one rewritten claim";
      break;
    }

    case ScenarioKind::InjectionPayload: {
      const std::vector<std::string>& payloads =
          scenario.params.payloads.empty() ? builtin_payloads()
                                           : scenario.params.payloads;
      auto cert = issue_cert(gw, scopes, t0, ttl, false, err);
      if (!cert) return std::nullopt;
      for (int i = 0; i < n; ++i) {
        const Millis at = t0 + static_cast<Millis>(i) * 50;
        const std::string& payload = payloads[i % payloads.size()];
        const auto& sa = pairs[i % pairs.size()];
        RawRequest raw =
            (i % 2 == 0)
                ? make_raw(spread_source(i), sa.first, sa.second,
                           "q=" + url_encode(payload), "", *cert)
                : make_raw(spread_source(i), sa.first, sa.second, "",
                           "comment=" + payload, *cert);

        // The oracle replays the gateway's own content path: after one
        // decode and the sanitizer pass, some deny rule must fire.
        CanonicalOutcome canon = canonicalize_request(raw, at);
        if (!canon.ok())
          return fail(i, "canonicalization failed: " + canon.error);
        SanitizedRequest cleaned =
            sanitize_request(*canon.request, ctx.policy);
        MatchResult mr = evaluate_rules(cleaned.request, *ctx.rules);
        if (!mr.verdict.denied())
          return fail(i, "no deny rule fires for payload: " + payload);
        corpus.entries.push_back({std::move(raw), at});
      }
      corpus.cert_note = "one multi-use certificate";
      break;
    }

    case ScenarioKind::UnknownAction: {
      auto cert = issue_cert(gw, scopes, t0, ttl, false, err);
      if (!cert) return std::nullopt;
      const char* pool[] = {"drop_tables", "sudo",  "fly",
                            "teleport",    "rm_rf", "mine_bitcoin"};
      for (int i = 0; i < n; ++i) {
        const Millis at = t0 + static_cast<Millis>(i) * 50;
        std::string action = (i % 7 == 6) ? "ghost_" + rng.hex(2)
                                          : pool[i % 6];
        const std::string& service = pairs[i % pairs.size()].first;
        RawRequest raw =
            make_raw(spread_source(i), service, action, "", "", *cert);
        std::string why;
        if (!content_clean(ctx, raw, at, false, &why)) return fail(i, why);
        corpus.entries.push_back({std::move(raw), at});
      }
      corpus.cert_note = "one multi-use certificate";
      break;
    }

    case ScenarioKind::Flood: {
      auto cert = issue_cert(gw, scopes, t0, ttl, false, err);
      if (!cert) return std::nullopt;
      const int total = n * 4;
      const auto& sa = pairs.front();
      for (int i = 0; i < total; ++i) {
        const Millis at = t0 + static_cast<Millis>(i);
        RawRequest raw = make_raw("203.0.113.77:4000", sa.first, sa.second,
                                  "", "", *cert);
        std::string why;
        if (i == 0 && !content_clean(ctx, raw, at, true, &why))
          return fail(0, why);
        corpus.entries.push_back({std::move(raw), at});
      }
      corpus.cert_note = "one source, one multi-use certificate, 1 ms apart";
      break;
    }

    case ScenarioKind::Benign: {
      const std::pair<const char*, const char*> queries[] = {
          {"symbol", "AUR"}, {"id", "c.1001"}, {"", ""}};
      for (int i = 0; i < n; ++i) {
        const Millis at = t0 + static_cast<Millis>(i) * 50;
        auto cert = issue_cert(gw, scopes, t0, ttl, false, err);
        if (!cert) return std::nullopt;
        const auto& sa = pairs[i % pairs.size()];
        const auto& q = queries[i % 3];
        std::string raw_query =
            *q.first ? std::string(q.first) + "=" + url_encode(q.second)
                     : std::string();
        RawRequest raw = make_raw(spread_source(i), sa.first, sa.second,
                                  raw_query, "", *cert);
        std::string why;
        if (!content_clean(ctx, raw, at, true, &why)) return fail(i, why);
        corpus.entries.push_back({std::move(raw), at});
      }
      corpus.cert_note = "fresh multi-use certificate per entry";
      break;
    }
  }
  return corpus;
}

namespace {

struct TripSink {
  std::mutex mu;
  std::vector<std::string>* out = nullptr;
};

// One scenario, one fresh gateway. Returns nullopt only for setup/oracle
// failures; gateway verdicts are what the report is for.
std::optional<ScenarioReport> run_one(const EvalSetup& setup,
                                      ScenarioKind kind, int seed_index,
                                      TripSink* trips, std::string* err) {
  GatewayWiring wiring = setup.wiring;
  wiring.audit_mirror_path.clear();  // evaluation leaves no files behind
  wiring.notify_path.clear();
  SeededRandom rng(mix_seed(setup.seed, seed_index));
  std::unique_ptr<Gateway> gw = Gateway::create(std::move(wiring), rng, err);
  if (!gw) return std::nullopt;

  auto reg = gw->ims().register_principal(kEvalUser, kEvalSecret,
                                          PrincipalKind::User);
  if (reg && *reg != RegisterError::DuplicateId) {
    if (err)
      *err = std::string("registering ") + kEvalUser + ": " + to_string(*reg);
    return std::nullopt;
  }

  const std::string label = to_string(kind);
  gw->breaker().set_trip_notifier([trips, label](const std::string& line) {
    std::lock_guard<std::mutex> lock(trips->mu);
    trips->out->push_back(label + ": " + line);
  });

  AttackScenario scenario;
  scenario.kind = kind;
  scenario.params.payloads = setup.payloads;
  scenario.seed = mix_seed(setup.seed, seed_index);
  auto corpus = generate_corpus(scenario, setup.n, *gw, setup.wiring.ims_key,
                                kT0, rng, setup.wiring.policy, err);
  if (!corpus) return std::nullopt;

  ScenarioReport report;
  report.name = label;
  for (const CorpusEntry& entry : corpus->entries) {
    HandleResult hr = gw->handle(entry.raw, entry.at);
    ++report.sent;
    if (hr.verdict.denied()) {
      ++report.denied;
      ++report.deny_layers[static_cast<std::size_t>(hr.verdict.layer)];
    } else {
      ++report.allowed;
    }
  }
  report.block_rate =
      report.sent ? static_cast<double>(report.denied) / report.sent : 0.0;
  return report;
}

// Threaded nonce-atomicity pass: every thread presents the same single-use
// certificate at the same instant. However the race lands, exactly one
// presentation may succeed.
std::optional<ScenarioReport> run_concurrent_replay(const EvalSetup& setup,
                                                    TripSink* trips,
                                                    std::string* err) {
  GatewayWiring wiring = setup.wiring;
  wiring.audit_mirror_path.clear();
  wiring.notify_path.clear();
  SeededRandom rng(mix_seed(setup.seed, kScenarioCount));
  std::unique_ptr<Gateway> gw = Gateway::create(std::move(wiring), rng, err);
  if (!gw) return std::nullopt;

  auto reg = gw->ims().register_principal(kEvalUser, kEvalSecret,
                                          PrincipalKind::User);
  if (reg && *reg != RegisterError::DuplicateId) {
    if (err)
      *err = std::string("registering ") + kEvalUser + ": " + to_string(*reg);
    return std::nullopt;
  }
  const std::string label = "replayed-cert-concurrent";
  gw->breaker().set_trip_notifier([trips, label](const std::string& line) {
    std::lock_guard<std::mutex> lock(trips->mu);
    trips->out->push_back(label + ": " + line);
  });

  ActionRegistry registry = gw->registry_snapshot();
  auto pairs = registry.entries;
  if (pairs.empty()) {
    if (err) *err = "action registry is empty; no corpus can be built";
    return std::nullopt;
  }
  const auto& sa = *pairs.begin();
  std::set<std::string> svc_set = registry.services();
  std::vector<std::string> scopes(svc_set.begin(), svc_set.end());
  auto once = issue_cert(*gw, scopes, kT0, 600'000, true, err);
  if (!once) return std::nullopt;

  const int threads = std::clamp(setup.n, 2, 256);
  std::atomic<int> allowed{0};
  std::array<std::atomic<int>, 7> layer_hits{};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int i = 0; i < threads; ++i) {
    pool.emplace_back([&, i] {
      RawRequest raw = make_raw(spread_source(i), sa.first, sa.second, "",
                                "", *once);
      HandleResult hr = gw->handle(raw, kT0);
      if (hr.verdict.denied())
        ++layer_hits[static_cast<std::size_t>(hr.verdict.layer)];
      else
        ++allowed;
    });
  }
  for (auto& t : pool) t.join();

  ScenarioReport report;
  report.name = label;
  report.sent = threads;
  report.allowed = allowed.load();
  report.denied = threads - report.allowed;
  for (std::size_t i = 0; i < report.deny_layers.size(); ++i)
    report.deny_layers[i] = layer_hits[i].load();
  report.block_rate =
      report.sent ? static_cast<double>(report.denied) / report.sent : 0.0;
  return report;
}

}  // namespace

std::optional<EvaluationReport> run_evaluation(const EvalSetup& setup,
                                               std::string* err) {
  if (setup.n < 1) {
    if (err) *err = "evaluation size must be at least 1";
    return std::nullopt;
  }
  EvaluationReport report;
  TripSink trips;
  trips.out = &report.trips;

  int seed_index = 0;
  for (ScenarioKind kind : setup.kinds) {
    auto sr = run_one(setup, kind, seed_index++, &trips, err);
    if (!sr) return std::nullopt;
    if (kind == ScenarioKind::Benign) {
      report.has_benign = true;
      report.benign_false_positive_rate = sr->block_rate;
    }
    report.scenarios.push_back(std::move(*sr));
  }
  if (setup.concurrent_replay) {
    auto sr = run_concurrent_replay(setup, &trips, err);
    if (!sr) return std::nullopt;
    report.scenarios.push_back(std::move(*sr));
  }
  return report;
}

std::string EvaluationReport::to_text() const {
  std::ostringstream out;
  std::size_t width = 8;
  for (const auto& s : scenarios) width = std::max(width, s.name.size());
  char line[160];
  std::snprintf(line, sizeof(line), "%-*s  %6s  %6s  %7s  %10s\n",
                static_cast<int>(width), "scenario", "sent", "denied",
                "allowed", "block-rate");
  out << line;
  for (const auto& s : scenarios) {
    std::snprintf(line, sizeof(line), "%-*s  %6d  %6d  %7d  %10s\n",
                  static_cast<int>(width), s.name.c_str(), s.sent, s.denied,
                  s.allowed, fmt_rate(s.block_rate).c_str());
    out << line;
  }
  if (has_benign)
    out << "\nbenign false-positive rate: "
        << fmt_rate(benign_false_positive_rate) << "\n";
  out << "breaker trips: " << trips.size() << "\n";
  for (const auto& t : trips) out << "  " << t << "\n";
  return out.str();
}

std::string EvaluationReport::to_machine() const {
  std::ostringstream out;
  for (const auto& s : scenarios)
    out << s.name << '\t' << s.sent << '\t' << s.denied << '\t' << s.allowed
        << '\t' << fmt_rate(s.block_rate) << '\n';
  return out.str();
}

}  // namespace sentinel
