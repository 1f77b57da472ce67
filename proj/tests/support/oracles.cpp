#include "support/oracles.hpp"

#include <algorithm>
#include <cctype>

#include <boost/regex.hpp>

namespace support {

using sentinel::Millis;
using sentinel::Request;
using sentinel::Rule;
using sentinel::RuleOp;
using sentinel::RuleTarget;

std::optional<std::string> percent_decode(std::string_view in,
                                          bool plus_is_space) {
  auto hexv = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  std::string out;
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in[i] == '%') {
      if (i + 2 >= in.size()) return std::nullopt;
      const int hi = hexv(in[i + 1]);
      const int lo = hexv(in[i + 2]);
      if (hi < 0 || lo < 0) return std::nullopt;
      out.push_back(static_cast<char>(hi * 16 + lo));
      i += 2;
    } else if (plus_is_space && in[i] == '+') {
      out.push_back(' ');
    } else {
      out.push_back(in[i]);
    }
  }
  return out;
}

std::string sanitize_ref(std::string_view text,
                         const std::set<unsigned char>& allowed, bool replace,
                         char replacement, int case_mode) {
  std::string out;
  for (char c : text) {
    if (allowed.count(static_cast<unsigned char>(c))) {
      out.push_back(c);
    } else if (replace) {
      out.push_back(replacement);
    }
  }
  for (char& c : out) {
    if (case_mode == 1) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (case_mode == 2) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

namespace {

// Field selection written against the grammar doc, not the engine source:
// path and source always exist; action/body exist when non-empty; query.any
// collects every value; query.<k> and header.<h> collect matching values.
struct Selected {
  std::vector<std::string> values;
  bool present = false;
};

Selected select_ref(const Request& req, const Rule& rule, std::size_t body_cap) {
  Selected sel;
  switch (rule.target) {
    case RuleTarget::Path:
      sel.values.push_back(req.path);
      sel.present = true;
      break;
    case RuleTarget::Source:
      sel.values.push_back(req.source);
      sel.present = true;
      break;
    case RuleTarget::Action:
      if (!req.action.empty()) {
        sel.values.push_back(req.action);
        sel.present = true;
      }
      break;
    case RuleTarget::Body:
      if (!req.body.empty()) {
        sel.values.push_back(req.body.substr(0, body_cap));
        sel.present = true;
      }
      break;
    case RuleTarget::QueryAny:
      for (const auto& kv : req.query) sel.values.push_back(kv.second);
      sel.present = !req.query.empty();
      break;
    case RuleTarget::QueryKey:
      for (const auto& kv : req.query)
        if (kv.first == rule.target_name) sel.values.push_back(kv.second);
      sel.present = !sel.values.empty();
      break;
    case RuleTarget::HeaderName:
      for (const auto& kv : req.headers)
        if (kv.first == rule.target_name) sel.values.push_back(kv.second);
      sel.present = !sel.values.empty();
      break;
  }
  return sel;
}

bool matches_ref(const Rule& rule, const std::string& v) {
  switch (rule.op) {
    case RuleOp::Rx: {
      std::string pat = rule.str_arg;
      boost::regex::flag_type flags = boost::regex::ECMAScript;
      if (pat.rfind("(?i)", 0) == 0) {
        pat = pat.substr(4);
        flags |= boost::regex::icase;
      }
      const boost::regex rx(pat, flags);
      return boost::regex_search(v, rx);
    }
    case RuleOp::Contains:
      return v.find(rule.str_arg) != std::string::npos;
    case RuleOp::Eq:
      return v == rule.str_arg;
    case RuleOp::LenGt:
      return static_cast<long long>(v.size()) > rule.int_arg;
    case RuleOp::Absent:
      return false;
  }
  return false;
}

}  // namespace

RuleRefOutcome eval_rules_ref(const Request& req,
                              const std::vector<Rule>& rules,
                              std::size_t body_cap) {
  RuleRefOutcome out;
  for (const Rule& rule : rules) {
    Selected sel = select_ref(req, rule, body_cap);
    bool hit;
    if (rule.op == RuleOp::Absent) {
      hit = !sel.present;
    } else {
      hit = false;
      for (const std::string& v : sel.values) {
        if (matches_ref(rule, v)) {
          hit = true;
          break;
        }
      }
    }
    if (!hit) continue;
    if (rule.action == sentinel::RuleAction::Log) {
      out.log_rule_ids.push_back(rule.id);
      continue;
    }
    out.rule_id = rule.id;
    out.denied = rule.action == sentinel::RuleAction::Deny;
    out.allow_rule = rule.action == sentinel::RuleAction::Allow;
    return out;
  }
  return out;  // implicit allow
}

bool DosRef::check(const std::string& source, Millis now) {
  State& st = sources_[source];
  if (st.banned_until && *st.banned_until > now) return false;
  long long in_window = 0;
  for (Millis t : st.admitted)
    if (t > now - cfg_.window_ms && t <= now) ++in_window;
  if (in_window + 1 > cfg_.max_requests) {
    st.banned_until = now + cfg_.ban_ms;
    return false;
  }
  st.admitted.push_back(now);
  return true;
}

std::optional<Millis> breaker_trip_ref(
    const std::vector<sentinel::ThreatEvent>& events,
    const sentinel::DetectionPolicy& policy) {
  std::vector<Millis> watched;
  for (const auto& ev : events) {
    if (policy.watched.count(ev.kind) == 0) continue;
    watched.push_back(ev.at);
    long long in_window = 0;
    for (Millis t : watched)
      if (t > ev.at - policy.window_ms && t <= ev.at) ++in_window;
    if (in_window >= policy.threshold) return ev.at;
  }
  return std::nullopt;
}

// --------------------------------------------------------------------------
// Generators

std::uint64_t pick(sentinel::RandomSource& rng, std::uint64_t bound) {
  return bound == 0 ? 0 : rng.next_u64() % bound;
}

std::string pick_of(sentinel::RandomSource& rng,
                    const std::vector<std::string>& pool) {
  return pool[pick(rng, pool.size())];
}

std::string gen_regex(sentinel::RandomSource& rng) {
  auto atom = [&rng]() -> std::string {
    switch (pick(rng, 6)) {
      case 0: {
        std::string s;
        const std::size_t n = 1 + pick(rng, 3);
        for (std::size_t i = 0; i < n; ++i)
          s.push_back(static_cast<char>('a' + pick(rng, 26)));
        return s;
      }
      case 1: return "\\d";
      case 2: return "\\w";
      case 3: return "\\s";
      case 4: {
        std::string s = "[";
        const std::size_t n = 2 + pick(rng, 3);
        for (std::size_t i = 0; i < n; ++i)
          s.push_back(static_cast<char>('a' + pick(rng, 26)));
        s.push_back(']');
        return s;
      }
      default: return ".";
    }
  };
  auto piece = [&]() {
    std::string s = atom();
    switch (pick(rng, 10)) {
      case 0: s.push_back('*'); break;
      case 1: s.push_back('+'); break;
      case 2: s.push_back('?'); break;
      default: break;
    }
    return s;
  };
  std::string body;
  const std::size_t n = 1 + pick(rng, 3);
  for (std::size_t i = 0; i < n; ++i) body += piece();
  if (pick(rng, 4) == 0) body = "(" + body + "|" + piece() + ")";
  if (pick(rng, 6) == 0) body = "^" + body;
  if (pick(rng, 6) == 0) body += "$";
  if (pick(rng, 4) == 0) body = "(?i)" + body;
  return body;
}

namespace {

// Values deliberately overlap the rule generator's argument pool so a
// useful share of random (request, ruleset) pairs actually match.
const std::vector<std::string> kValuePool = {
    "hello", "name", "alpha42", "<script>alert(1)</script>", "../etc/passwd",
    "' or '1'='1", "plain text", "UNION SELECT", "abc123", "", "xyz",
    "a b c", "tab\there", "quote\"inside", "back\\slash",
};

const std::vector<std::string> kKeyPool = {"q", "id", "x", "name", "page"};
const std::vector<std::string> kHeaderPool = {"host", "user-agent", "accept",
                                              "x-trace"};
const std::vector<std::string> kServicePool = {"trading", "contract", "echo",
                                               "banking"};
const std::vector<std::string> kActionPool = {"list_quotes", "get_quote",
                                              "ping", "say", "drop_tables"};

}  // namespace

sentinel::Request gen_request(sentinel::RandomSource& rng) {
  sentinel::Request req;
  req.request_id = "ref-req";
  req.source = "10.1." + std::to_string(pick(rng, 8)) + "." +
               std::to_string(1 + pick(rng, 250)) + ":" +
               std::to_string(1024 + pick(rng, 5000));
  req.service = pick_of(rng, kServicePool);
  if (pick(rng, 8) == 0) req.action.clear();
  else req.action = pick_of(rng, kActionPool);
  req.path = "/svc/" + req.service + "/" + (req.action.empty() ? "x" : req.action);
  const std::size_t nq = pick(rng, 4);
  for (std::size_t i = 0; i < nq; ++i)
    req.query.emplace_back(pick_of(rng, kKeyPool), pick_of(rng, kValuePool));
  const std::size_t nh = pick(rng, 3);
  for (std::size_t i = 0; i < nh; ++i)
    req.headers.emplace_back(pick_of(rng, kHeaderPool),
                             pick_of(rng, kValuePool));
  if (pick(rng, 3) != 0) req.body = pick_of(rng, kValuePool);
  return req;
}

std::string gen_rule_file(sentinel::RandomSource& rng, int max_rules) {
  auto quoted = [](const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
      switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        case '\r': out += "\\r"; break;
        default: out.push_back(c);
      }
    }
    out.push_back('"');
    return out;
  };

  const int n = static_cast<int>(pick(rng, max_rules + 1));
  std::string text;
  if (pick(rng, 3) == 0) text += "# generated for the differential tests\n";
  for (int i = 0; i < n; ++i) {
    std::string target;
    switch (pick(rng, 7)) {
      case 0: target = "path"; break;
      case 1: target = "body"; break;
      case 2: target = "source"; break;
      case 3: target = "action"; break;
      case 4: target = "query.any"; break;
      case 5: target = "query." + pick_of(rng, kKeyPool); break;
      default: target = "header." + pick_of(rng, kHeaderPool); break;
    }
    std::string op, arg;
    switch (pick(rng, 10)) {
      case 0: case 1: case 2:
        op = "rx";
        arg = quoted(gen_regex(rng));
        break;
      case 3: case 4: case 5:
        op = "contains";
        arg = quoted(pick_of(rng, kValuePool));
        break;
      case 6: case 7:
        op = "eq";
        arg = quoted(pick_of(rng, kValuePool));
        break;
      case 8:
        op = "len_gt";
        arg = std::to_string(pick(rng, 40));
        break;
      default:
        op = "absent";
        break;
    }
    std::string action;
    switch (pick(rng, 10)) {
      case 0: case 1: action = "allow"; break;
      case 2: case 3: action = "log"; break;
      default: action = "deny"; break;
    }
    text += "rule " + quoted("r" + std::to_string(i)) + " target:" + target +
            " op:" + op + (arg.empty() ? "" : " " + arg) +
            " action:" + action +
            " severity:" + std::to_string(1 + pick(rng, 5)) + "\n";
    if (pick(rng, 5) == 0) text += "\n";
  }
  return text;
}

}  // namespace support
