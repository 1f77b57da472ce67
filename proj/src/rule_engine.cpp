#include "sentinel/rule_engine.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "sentinel/crypto.hpp"
#include "sentinel/encoding.hpp"

namespace sentinel {
namespace {

struct Token {
  std::string text;
  int column = 0;  // 1-based
  bool quoted = false;
};

struct LineError {
  int column;
  std::string message;
};

// Splits one rule line into bare and quoted tokens. An unquoted '#' starts
// a comment that runs to end of line.
bool tokenize_line(const std::string& line, std::vector<Token>* out,
                   LineError* err) {
  std::size_t i = 0;
  while (i < line.size()) {
    char c = line[i];
    if (c == ' ' || c == '\t') {
      ++i;
      continue;
    }
    if (c == '#') break;
    Token tok;
    tok.column = static_cast<int>(i) + 1;
    if (c == '"') {
      tok.quoted = true;
      ++i;
      bool closed = false;
      while (i < line.size()) {
        char q = line[i];
        if (q == '"') {
          closed = true;
          ++i;
          break;
        }
        if (q == '\\') {
          if (i + 1 >= line.size()) {
            *err = {static_cast<int>(i) + 1, "dangling escape"};
            return false;
          }
          char esc = line[i + 1];
          switch (esc) {
            case '"': tok.text.push_back('"'); break;
            case '\\': tok.text.push_back('\\'); break;
            case 'n': tok.text.push_back('\n'); break;
            case 't': tok.text.push_back('\t'); break;
            case 'r': tok.text.push_back('\r'); break;
            default:
              *err = {static_cast<int>(i + 1) + 1,
                      std::string("unknown escape \"\\") + esc + "\""};
              return false;
          }
          i += 2;
        } else {
          tok.text.push_back(q);
          ++i;
        }
      }
      if (!closed) {
        *err = {tok.column, "unterminated string"};
        return false;
      }
    } else {
      while (i < line.size() && line[i] != ' ' && line[i] != '\t') {
        tok.text.push_back(line[i]);
        ++i;
      }
    }
    out->push_back(std::move(tok));
  }
  return true;
}

bool all_digits(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (c < '0' || c > '9') return false;
  return true;
}

std::string quote(const std::string& s) {
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
}

std::string target_text(const Rule& r) {
  switch (r.target) {
    case RuleTarget::Path: return "path";
    case RuleTarget::Body: return "body";
    case RuleTarget::Source: return "source";
    case RuleTarget::Action: return "action";
    case RuleTarget::QueryAny: return "query.any";
    case RuleTarget::QueryKey: return "query." + r.target_name;
    case RuleTarget::HeaderName: return "header." + r.target_name;
  }
  return "path";
}

RuleParseResult fail(int line, int column, std::string message) {
  RuleParseResult r;
  r.error = RuleParseError{line, column, std::move(message)};
  return r;
}

// Compiles str_arg; a leading "(?i)" selects case-insensitive matching
// (std::regex has no inline flag syntax).
bool compile_rx(Rule* rule, std::string* what) {
  std::string pat = rule->str_arg;
  auto flags = std::regex::ECMAScript | std::regex::optimize;
  if (pat.rfind("(?i)", 0) == 0) {
    pat = pat.substr(4);
    flags |= std::regex::icase;
  }
  try {
    rule->rx = std::make_shared<const std::regex>(pat, flags);
  } catch (const std::regex_error& e) {
    *what = e.what();
    return false;
  }
  return true;
}

struct Selection {
  std::vector<std::string_view> values;
  bool present = false;
};

Selection select(const Request& req, const Rule& rule,
                 const RuleEvalOptions& opts) {
  Selection sel;
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
      sel.present = !req.action.empty();
      if (sel.present) sel.values.push_back(req.action);
      break;
    case RuleTarget::Body:
      sel.present = !req.body.empty();
      if (sel.present)
        sel.values.push_back(std::string_view(req.body).substr(0, opts.body_cap));
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

bool value_matches(const Rule& rule, std::string_view v) {
  switch (rule.op) {
    case RuleOp::Rx:
      return std::regex_search(v.data(), v.data() + v.size(), *rule.rx);
    case RuleOp::Contains:
      return v.find(rule.str_arg) != std::string_view::npos;
    case RuleOp::Eq:
      return v == rule.str_arg;
    case RuleOp::LenGt:
      return static_cast<long long>(v.size()) > rule.int_arg;
    case RuleOp::Absent:
      return false;  // handled at selection level
  }
  return false;
}

}  // namespace

std::string RuleParseError::to_string() const {
  std::ostringstream os;
  os << "line " << line << ", col " << column << ": " << message;
  return os.str();
}

RuleParseResult parse_rules(std::string_view text, const std::string& source_name) {
  RuleSet rs;
  rs.source_name = source_name;
  rs.version = to_hex(sha256(text));

  std::unordered_map<std::string, int> seen;  // id -> line
  int lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string line(text.substr(pos, nl == std::string_view::npos
                                          ? std::string_view::npos
                                          : nl - pos));
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();

    std::vector<Token> toks;
    LineError lerr{0, ""};
    if (!tokenize_line(line, &toks, &lerr))
      return fail(lineno, lerr.column, lerr.message);
    if (toks.empty()) continue;

    const int eol = static_cast<int>(line.size()) + 1;
    std::size_t t = 0;
    auto need = [&](const char* what) -> const Token* {
      if (t >= toks.size()) return nullptr;
      (void)what;
      return &toks[t];
    };

    const Token* kw = need("rule");
    if (kw->quoted || kw->text != "rule")
      return fail(lineno, kw->column, "expected keyword \"rule\"");
    ++t;

    const Token* idt = need("rule id");
    if (!idt) return fail(lineno, eol, "expected quoted rule id");
    if (!idt->quoted)
      return fail(lineno, idt->column, "rule id must be a quoted string");
    if (idt->text.empty())
      return fail(lineno, idt->column, "rule id must not be empty");
    Rule rule;
    rule.id = idt->text;
    rule.line = lineno;
    ++t;

    const Token* tt = need("target");
    if (!tt) return fail(lineno, eol, "expected target:<selector>");
    if (tt->quoted || tt->text.rfind("target:", 0) != 0)
      return fail(lineno, tt->column, "expected target:<selector>");
    {
      std::string sel = tt->text.substr(7);
      if (sel == "path") {
        rule.target = RuleTarget::Path;
      } else if (sel == "body") {
        rule.target = RuleTarget::Body;
      } else if (sel == "source") {
        rule.target = RuleTarget::Source;
      } else if (sel == "action") {
        rule.target = RuleTarget::Action;
      } else if (sel == "query.any") {
        rule.target = RuleTarget::QueryAny;
      } else if (sel.rfind("query.", 0) == 0 && sel.size() > 6) {
        rule.target = RuleTarget::QueryKey;
        rule.target_name = sel.substr(6);
      } else if (sel.rfind("header.", 0) == 0 && sel.size() > 7) {
        rule.target = RuleTarget::HeaderName;
        rule.target_name = sel.substr(7);
        for (char& c : rule.target_name)
          c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      } else {
        return fail(lineno, tt->column, "unknown target \"" + sel + "\"");
      }
    }
    ++t;

    const Token* ot = need("op");
    if (!ot) return fail(lineno, eol, "expected op:<operator>");
    if (ot->quoted || ot->text.rfind("op:", 0) != 0)
      return fail(lineno, ot->column, "expected op:<operator>");
    std::string opname = ot->text.substr(3);
    bool wants_string = false, wants_int = false;
    if (opname == "rx") {
      rule.op = RuleOp::Rx;
      wants_string = true;
    } else if (opname == "contains") {
      rule.op = RuleOp::Contains;
      wants_string = true;
    } else if (opname == "eq") {
      rule.op = RuleOp::Eq;
      wants_string = true;
    } else if (opname == "len_gt") {
      rule.op = RuleOp::LenGt;
      wants_int = true;
    } else if (opname == "absent") {
      rule.op = RuleOp::Absent;
    } else {
      return fail(lineno, ot->column, "unknown op \"" + opname + "\"");
    }
    ++t;

    if (wants_string) {
      const Token* at = need("argument");
      if (!at) return fail(lineno, eol, "op " + opname + " needs a quoted argument");
      if (!at->quoted)
        return fail(lineno, at->column,
                    "op " + opname + " needs a quoted argument");
      rule.str_arg = at->text;
      if (rule.op == RuleOp::Rx) {
        std::string what;
        if (!compile_rx(&rule, &what))
          return fail(lineno, at->column, "invalid regex: " + what);
      }
      ++t;
    } else if (wants_int) {
      const Token* at = need("argument");
      if (!at) return fail(lineno, eol, "op len_gt needs an integer argument");
      if (at->quoted || !all_digits(at->text))
        return fail(lineno, at->column,
                    "op len_gt needs a non-negative integer");
      try {
        rule.int_arg = std::stoll(at->text);
      } catch (const std::exception&) {
        return fail(lineno, at->column, "integer out of range");
      }
      ++t;
    }

    const Token* act = need("action");
    if (!act) return fail(lineno, eol, "expected action:<deny|allow|log>");
    if (act->quoted || act->text.rfind("action:", 0) != 0)
      return fail(lineno, act->column, "expected action:<deny|allow|log>");
    {
      std::string a = act->text.substr(7);
      if (a == "deny") {
        rule.action = RuleAction::Deny;
      } else if (a == "allow") {
        rule.action = RuleAction::Allow;
      } else if (a == "log") {
        rule.action = RuleAction::Log;
      } else {
        return fail(lineno, act->column, "unknown action \"" + a + "\"");
      }
    }
    ++t;

    const Token* sev = need("severity");
    if (!sev) return fail(lineno, eol, "expected severity:<1-5>");
    if (sev->quoted || sev->text.rfind("severity:", 0) != 0)
      return fail(lineno, sev->column, "expected severity:<1-5>");
    {
      std::string s = sev->text.substr(9);
      if (!all_digits(s) || s.size() > 1 || s[0] < '1' || s[0] > '5')
        return fail(lineno, sev->column, "severity must be 1..5");
      rule.severity = s[0] - '0';
    }
    ++t;

    if (t < toks.size())
      return fail(lineno, toks[t].column,
                  "unexpected token \"" + toks[t].text + "\"");

    auto ins = seen.emplace(rule.id, lineno);
    if (!ins.second)
      return fail(lineno, idt->column,
                  "duplicate rule id \"" + rule.id + "\"; first defined at line " +
                      std::to_string(ins.first->second));
    rs.rules.push_back(std::move(rule));
  }

  RuleParseResult out;
  out.ruleset = std::move(rs);
  return out;
}

RuleParseResult load_rules_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    RuleParseResult r;
    r.error = RuleParseError{0, 0, "cannot open " + path};
    return r;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_rules(buf.str(), path);
}

std::string serialize_rules(const RuleSet& rs) {
  std::ostringstream os;
  for (const Rule& r : rs.rules) {
    os << "rule " << quote(r.id) << " target:" << target_text(r)
       << " op:" << to_string(r.op);
    switch (r.op) {
      case RuleOp::Rx:
      case RuleOp::Contains:
      case RuleOp::Eq:
        os << ' ' << quote(r.str_arg);
        break;
      case RuleOp::LenGt:
        os << ' ' << r.int_arg;
        break;
      case RuleOp::Absent:
        break;
    }
    os << " action:" << to_string(r.action) << " severity:" << r.severity
       << '\n';
  }
  return os.str();
}

MatchResult evaluate_rules(const Request& req, const RuleSet& rs,
                           const RuleEvalOptions& opts) {
  MatchResult out;
  for (const Rule& rule : rs.rules) {
    Selection sel = select(req, rule, opts);
    bool hit = false;
    std::string_view matched_value;
    if (rule.op == RuleOp::Absent) {
      hit = !sel.present;
    } else {
      for (std::string_view v : sel.values) {
        if (value_matches(rule, v)) {
          hit = true;
          matched_value = v;
          break;
        }
      }
    }
    if (!hit) continue;

    std::string excerpt(matched_value.substr(0, opts.excerpt_cap));
    switch (rule.action) {
      case RuleAction::Log:
        out.log_hits.push_back({rule.id, rule.severity, excerpt});
        continue;
      case RuleAction::Allow:
        out.verdict = Verdict::allow(Layer::RuleEngine, "allow-rule",
                                     "rule " + rule.id);
        out.matched_rule = rule.id;
        out.excerpt = excerpt;
        return out;
      case RuleAction::Deny:
        out.verdict =
            Verdict::deny(Layer::RuleEngine, "rule-match",
                          "rule " + rule.id + " severity " +
                              std::to_string(rule.severity));
        out.verdict.rule_id = rule.id;
        out.matched_rule = rule.id;
        out.excerpt = excerpt;
        return out;
    }
  }
  out.verdict = Verdict::allow(Layer::RuleEngine, "no-match");
  return out;
}

const char* to_string(RuleTarget t) {
  switch (t) {
    case RuleTarget::Path: return "path";
    case RuleTarget::Body: return "body";
    case RuleTarget::Source: return "source";
    case RuleTarget::Action: return "action";
    case RuleTarget::QueryAny: return "query.any";
    case RuleTarget::QueryKey: return "query.<key>";
    case RuleTarget::HeaderName: return "header.<name>";
  }
  return "?";
}

const char* to_string(RuleOp op) {
  switch (op) {
    case RuleOp::Rx: return "rx";
    case RuleOp::Contains: return "contains";
    case RuleOp::Eq: return "eq";
    case RuleOp::LenGt: return "len_gt";
    case RuleOp::Absent: return "absent";
  }
  return "?";
}

const char* to_string(RuleAction a) {
  switch (a) {
    case RuleAction::Deny: return "deny";
    case RuleAction::Allow: return "allow";
    case RuleAction::Log: return "log";
  }
  return "?";
}

}  // namespace sentinel
