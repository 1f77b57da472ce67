#include "sentinel/sanitizer.hpp"

#include <cctype>
#include <sstream>
#include <vector>

namespace sentinel {
namespace {

bool is_letter(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

char map_case(char c, CaseMode mode) {
  switch (mode) {
    case CaseMode::Upper:
      return static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    case CaseMode::Lower:
      return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    case CaseMode::Preserve:
      break;
  }
  return c;
}

}  // namespace

bool SanitizationPolicy::allows(char c) const {
  if (is_letter(c) || is_digit(c)) return true;
  return extra.find(c) != std::string::npos;
}

SanitizationPolicy SanitizationPolicy::strict_upper() {
  SanitizationPolicy p;
  p.extra.clear();
  p.strategy = SanitizeStrategy::Strip;
  p.case_mode = CaseMode::Upper;
  p.query_values = true;
  p.body_text = true;
  p.header_values = false;
  p.path_segments = false;
  p.report = true;
  return p;
}

std::optional<SanitizationPolicy> parse_policy(const std::string& allowed,
                                               const std::string& strategy,
                                               const std::string& case_mode,
                                               const std::string& targets,
                                               bool report, std::string* err) {
  SanitizationPolicy p;
  p.report = report;

  if (allowed.rfind("alnum", 0) != 0) {
    if (err) *err = "allowed classes must start with \"alnum\"";
    return std::nullopt;
  }
  std::string rest = allowed.substr(5);
  if (!rest.empty()) {
    if (rest[0] != '+') {
      if (err) *err = "expected \"alnum\" or \"alnum+<chars>\"";
      return std::nullopt;
    }
    for (std::size_t i = 1; i < rest.size(); ++i) {
      char c = rest[i];
      if (c == '\\') {
        if (i + 1 >= rest.size()) {
          if (err) *err = "dangling escape in allowed classes";
          return std::nullopt;
        }
        char esc = rest[++i];
        if (esc == 's') {
          p.extra.push_back(' ');
        } else if (esc == '\\') {
          p.extra.push_back('\\');
        } else {
          if (err) *err = std::string("unknown escape \"\\") + esc + "\"";
          return std::nullopt;
        }
      } else {
        p.extra.push_back(c);
      }
    }
  }

  if (strategy == "strip") {
    p.strategy = SanitizeStrategy::Strip;
  } else if (strategy.rfind("replace:", 0) == 0 && strategy.size() == 9) {
    p.strategy = SanitizeStrategy::Replace;
    p.replacement = strategy[8];
    if (!p.allows(p.replacement)) {
      if (err) *err = "replacement character is not itself allowed";
      return std::nullopt;
    }
  } else {
    if (err) *err = "strategy must be \"strip\" or \"replace:<c>\"";
    return std::nullopt;
  }

  if (case_mode == "preserve") {
    p.case_mode = CaseMode::Preserve;
  } else if (case_mode == "upper") {
    p.case_mode = CaseMode::Upper;
  } else if (case_mode == "lower") {
    p.case_mode = CaseMode::Lower;
  } else {
    if (err) *err = "case must be preserve, upper or lower";
    return std::nullopt;
  }

  p.query_values = p.body_text = p.header_values = p.path_segments = false;
  std::stringstream ss(targets);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok == "query") {
      p.query_values = true;
    } else if (tok == "body") {
      p.body_text = true;
    } else if (tok == "headers") {
      p.header_values = true;
    } else if (tok == "path") {
      p.path_segments = true;
    } else if (tok.empty()) {
      continue;
    } else {
      if (err) *err = "unknown sanitize target \"" + tok + "\"";
      return std::nullopt;
    }
  }
  if (!p.has_targets()) {
    if (err) *err = "sanitizer needs at least one target";
    return std::nullopt;
  }
  return p;
}

SanitizedInput sanitize(std::string_view text, const SanitizationPolicy& policy) {
  SanitizedInput out;
  out.original.assign(text);
  out.cleaned.reserve(text.size());
  for (char c : text) {
    if (policy.allows(c)) {
      out.cleaned.push_back(c);
    } else {
      ++out.removed_count;
      if (policy.strategy == SanitizeStrategy::Replace)
        out.cleaned.push_back(policy.replacement);
    }
  }
  for (char& c : out.cleaned) c = map_case(c, policy.case_mode);
  return out;
}

SanitizedRequest sanitize_request(const Request& req,
                                  const SanitizationPolicy& policy) {
  SanitizedRequest out;
  out.request = req;
  auto clean = [&](std::string& field) {
    SanitizedInput s = sanitize(field, policy);
    out.total_removed += s.removed_count;
    field = std::move(s.cleaned);
  };

  if (policy.query_values) {
    for (auto& kv : out.request.query) clean(kv.second);
  }
  if (policy.body_text) clean(out.request.body);
  if (policy.header_values) {
    for (auto& kv : out.request.headers) {
      if (kv.first == "x-ims-cert") continue;
      clean(kv.second);
    }
  }
  if (policy.path_segments) {
    std::vector<std::string> segs;
    std::string cur;
    const std::string& path = out.request.path;
    for (std::size_t i = 1; i <= path.size(); ++i) {
      if (i == path.size() || path[i] == '/') {
        SanitizedInput s = sanitize(cur, policy);
        out.total_removed += s.removed_count;
        if (!s.cleaned.empty()) segs.push_back(std::move(s.cleaned));
        cur.clear();
      } else {
        cur.push_back(path[i]);
      }
    }
    std::string rebuilt = "/";
    for (std::size_t i = 0; i < segs.size(); ++i) {
      if (i) rebuilt.push_back('/');
      rebuilt += segs[i];
    }
    out.request.path = std::move(rebuilt);
  }
  return out;
}

}  // namespace sentinel
