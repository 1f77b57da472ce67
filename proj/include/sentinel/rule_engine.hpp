#pragma once

#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "sentinel/domain.hpp"

namespace sentinel {

enum class RuleTarget {
  Path,
  Body,
  Source,
  Action,
  QueryAny,
  QueryKey,   // target_name = query key (case-sensitive)
  HeaderName  // target_name = header name (lowercased)
};

enum class RuleOp { Rx, Contains, Eq, LenGt, Absent };
enum class RuleAction { Deny, Allow, Log };

struct Rule {
  std::string id;
  RuleTarget target = RuleTarget::Path;
  std::string target_name;
  RuleOp op = RuleOp::Contains;
  std::string str_arg;       // rx / contains / eq
  long long int_arg = 0;     // len_gt
  RuleAction action = RuleAction::Deny;
  int severity = 1;
  int line = 0;

  // Compiled form of str_arg for op rx; shared so rules stay copyable.
  std::shared_ptr<const std::regex> rx;

  bool operator==(const Rule& o) const {
    return id == o.id && target == o.target && target_name == o.target_name &&
           op == o.op && str_arg == o.str_arg && int_arg == o.int_arg &&
           action == o.action && severity == o.severity;
  }
};

struct RuleParseError {
  int line = 0;    // 1-based
  int column = 0;  // 1-based
  std::string message;
  std::string to_string() const;
};

struct RuleSet {
  std::vector<Rule> rules;
  std::string source_name;
  std::string version;  // content hash, stable for identical input text

  bool operator==(const RuleSet& o) const { return rules == o.rules; }
};

struct RuleParseResult {
  std::optional<RuleSet> ruleset;
  std::optional<RuleParseError> error;
};

RuleParseResult parse_rules(std::string_view text, const std::string& source_name);
RuleParseResult load_rules_file(const std::string& path);

// Canonical text form; parse(serialize(rs)).rules == rs.rules.
std::string serialize_rules(const RuleSet& rs);

struct RuleLogHit {
  std::string rule_id;
  int severity = 0;
  std::string excerpt;
};

struct MatchResult {
  Verdict verdict;
  std::optional<std::string> matched_rule;
  std::string excerpt;               // capped slice of the matching value
  std::vector<RuleLogHit> log_hits;  // log-action rules that fired en route
};

struct RuleEvalOptions {
  std::size_t body_cap = 1 << 20;       // bytes of body examined
  std::size_t excerpt_cap = 128;        // bytes of excerpt retained
};

// First match wins; log rules record a hit and evaluation continues.
// Rules never mutate the request.
MatchResult evaluate_rules(const Request& req, const RuleSet& rs,
                           const RuleEvalOptions& opts = {});

const char* to_string(RuleTarget t);
const char* to_string(RuleOp op);
const char* to_string(RuleAction a);

}  // namespace sentinel
