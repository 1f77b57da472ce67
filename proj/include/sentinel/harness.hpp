#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sentinel/gateway.hpp"

namespace sentinel {

enum class ScenarioKind {
  ForgedCert,
  ReplayedCert,
  TamperedCert,
  InjectionPayload,
  UnknownAction,
  Flood,
  Benign,
};

constexpr int kScenarioCount = 7;

const char* to_string(ScenarioKind k);
std::optional<ScenarioKind> scenario_from_name(const std::string& name);
std::vector<ScenarioKind> all_scenarios();

struct ScenarioParams {
  std::vector<std::string> payloads;  // InjectionPayload corpus
  int bit_flip_count = 1;             // flips per forged certificate
};

struct AttackScenario {
  ScenarioKind kind = ScenarioKind::Benign;
  ScenarioParams params;
  std::uint64_t seed = 0;
};

struct ScenarioReport {
  std::string name;
  int sent = 0;
  int denied = 0;
  int allowed = 0;
  std::array<int, 7> deny_layers{};  // indexed by Layer
  double block_rate = 0.0;
};

struct EvaluationReport {
  std::vector<ScenarioReport> scenarios;
  bool has_benign = false;
  double benign_false_positive_rate = 0.0;
  std::vector<std::string> trips;  // "<scenario>: TRIP <ms> <reason>"

  std::string to_text() const;     // aligned human table
  std::string to_machine() const;  // scenario\tsent\tdenied\tallowed\trate
};

// Everything a deterministic evaluation needs. The wiring is a template:
// each scenario gets a fresh gateway built from a copy (audit mirror and
// trip-notification paths are ignored so runs leave no files behind), a
// per-scenario seeded RNG, and a manual clock — identical inputs produce
// identical report bytes.
struct EvalSetup {
  GatewayWiring wiring;
  std::uint64_t seed = 7;
  int n = 100;
  std::vector<ScenarioKind> kinds = all_scenarios();
  std::vector<std::string> payloads;  // empty -> bundled defaults
  bool concurrent_replay = false;     // adds a threaded nonce-atomicity pass
};

// The per-entry labels the oracle established before the gateway run.
struct CorpusEntry {
  RawRequest raw;
  Millis at = 0;  // manual-clock time for this entry
};

struct Corpus {
  std::vector<CorpusEntry> entries;
  std::string cert_note;  // human note on how certs were produced
};

// Builds the scenario corpus against this gateway's IMS (certificates must
// come from the instance under test or they are trivially unknown). Every
// entry is vetted by an offline oracle before it is admitted: forged and
// tampered certificates must fail `decode_and_verify` under `ims_key`,
// injection payloads must trip the rule set after sanitization, benign
// entries must clear every layer. Returns nullopt with *err when the
// oracle rejects an entry — the harness never grades the gateway against
// unlabeled inputs. The flood corpus holds 4*n entries so the volume
// actually exceeds a default rate budget.
std::optional<Corpus> generate_corpus(const AttackScenario& scenario, int n,
                                      Gateway& gw, const Key256& ims_key,
                                      Millis t0, RandomSource& rng,
                                      const SanitizationPolicy& policy,
                                      std::string* err);

std::optional<EvaluationReport> run_evaluation(const EvalSetup& setup,
                                               std::string* err);

const std::vector<std::string>& builtin_payloads();

}  // namespace sentinel
