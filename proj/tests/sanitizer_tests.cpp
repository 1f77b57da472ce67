#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <string>

#include "sentinel/domain.hpp"
#include "sentinel/rng.hpp"
#include "sentinel/sanitizer.hpp"
#include "support/oracles.hpp"
#include "support/testbed.hpp"

using namespace sentinel;

namespace {

SanitizationPolicy must_policy(const std::string& allowed,
                               const std::string& strategy,
                               const std::string& case_mode,
                               const std::string& targets) {
  std::string err;
  auto p = parse_policy(allowed, strategy, case_mode, targets, false, &err);
  REQUIRE_MESSAGE(p.has_value(), err);
  return *p;
}

std::string policy_error(const std::string& allowed, const std::string& strategy,
                         const std::string& case_mode,
                         const std::string& targets) {
  std::string err;
  auto p = parse_policy(allowed, strategy, case_mode, targets, false, &err);
  REQUIRE_FALSE(p.has_value());
  return err;
}

}  // namespace

TEST_CASE("the strict policy turns \"#@abc*\" into \"ABC\"") {
  const SanitizationPolicy p = SanitizationPolicy::strict_upper();
  SanitizedInput got = sanitize("#@abc*", p);
  CHECK(got.cleaned == "ABC");
  CHECK(got.removed_count == 3);
  CHECK(got.original == "#@abc*");

  CHECK(p.extra.empty());
  CHECK(p.strategy == SanitizeStrategy::Strip);
  CHECK(p.case_mode == CaseMode::Upper);
  CHECK(p.query_values);
  CHECK(p.body_text);
  CHECK_FALSE(p.header_values);
  CHECK_FALSE(p.path_segments);
  CHECK(p.report);
}

TEST_CASE("allows() covers alnum always, extras verbatim") {
  SanitizationPolicy p;
  p.extra = " ._";
  for (char c : {'a', 'z', 'A', 'Z', '0', '9', ' ', '.', '_'}) CHECK(p.allows(c));
  for (char c : {'!', '#', '-', '\t', '\0'}) CHECK_FALSE(p.allows(c));
}

TEST_CASE("policy strings parse") {
  SanitizationPolicy p = must_policy("alnum+\\s\\\\._-", "strip", "preserve", "query,body");
  CHECK(p.extra == " \\._-");
  CHECK(p.strategy == SanitizeStrategy::Strip);
  CHECK(p.case_mode == CaseMode::Preserve);
  CHECK((p.query_values && p.body_text));
  CHECK_FALSE((p.header_values || p.path_segments));

  SanitizationPolicy q = must_policy("alnum+_", "replace:_", "upper", ",query,,headers,");
  CHECK(q.extra == "_");
  CHECK(q.strategy == SanitizeStrategy::Replace);
  CHECK(q.replacement == '_');
  CHECK(q.case_mode == CaseMode::Upper);
  CHECK((q.query_values && q.header_values));
  CHECK_FALSE((q.body_text || q.path_segments));

  SanitizationPolicy r = must_policy("alnum+", "strip", "lower", "path");
  CHECK(r.extra.empty());
  CHECK(r.case_mode == CaseMode::Lower);
  CHECK(r.path_segments);
}

TEST_CASE("policy strings that do not parse say why") {
  CHECK(policy_error("letters", "strip", "preserve", "query") ==
        "allowed classes must start with \"alnum\"");
  CHECK(policy_error("alnumx", "strip", "preserve", "query") ==
        "expected \"alnum\" or \"alnum+<chars>\"");
  CHECK(policy_error("alnum+\\", "strip", "preserve", "query") ==
        "dangling escape in allowed classes");
  CHECK(policy_error("alnum+\\x", "strip", "preserve", "query") ==
        "unknown escape \"\\x\"");
  CHECK(policy_error("alnum", "drop", "preserve", "query") ==
        "strategy must be \"strip\" or \"replace:<c>\"");
  CHECK(policy_error("alnum", "replace:", "preserve", "query") ==
        "strategy must be \"strip\" or \"replace:<c>\"");
  CHECK(policy_error("alnum", "replace:ab", "preserve", "query") ==
        "strategy must be \"strip\" or \"replace:<c>\"");
  CHECK(policy_error("alnum", "replace:*", "preserve", "query") ==
        "replacement character is not itself allowed");
  CHECK(policy_error("alnum", "strip", "mixed", "query") ==
        "case must be preserve, upper or lower");
  CHECK(policy_error("alnum", "strip", "preserve", "query,bogus") ==
        "unknown sanitize target \"bogus\"");
  CHECK(policy_error("alnum", "strip", "preserve", "") ==
        "sanitizer needs at least one target");
  CHECK(policy_error("alnum", "strip", "preserve", ",,") ==
        "sanitizer needs at least one target");
}

TEST_CASE("strip drops, replace substitutes, and case maps afterwards") {
  SanitizationPolicy strip;  // defaults: strip, preserve
  CHECK(sanitize("a!b?c", strip).cleaned == "abc");
  CHECK(sanitize("a!b?c", strip).removed_count == 2);

  SanitizationPolicy rep = strip;
  rep.strategy = SanitizeStrategy::Replace;
  rep.replacement = 'x';
  SanitizedInput r = sanitize("a!b?c", rep);
  CHECK(r.cleaned == "axbxc");
  CHECK(r.removed_count == 2);  // replaced characters still count as removed

  rep.case_mode = CaseMode::Upper;
  CHECK(sanitize("a!b", rep).cleaned == "AXB");  // replacement is case-mapped too

  SanitizationPolicy lower = strip;
  lower.case_mode = CaseMode::Lower;
  CHECK(sanitize("MiXed42", lower).cleaned == "mixed42");

  CHECK(sanitize("", strip).cleaned == "");
  CHECK(sanitize("", strip).removed_count == 0);
}

TEST_CASE("sanitization agrees with the reference on random inputs") {
  SeededRandom rng(21);
  static const std::string extra_pool = " ._-@#*/\\<>'\"&=%+?!";
  int checked = 0;
  for (int round = 0; round < 1000; ++round) {
    SanitizationPolicy p;
    const auto n_extra = support::pick(rng, 6);
    for (std::uint64_t i = 0; i < n_extra; ++i) {
      p.extra.push_back(extra_pool[support::pick(rng, extra_pool.size())]);
    }
    const bool replace = support::pick(rng, 2) == 1;
    if (replace) {
      p.strategy = SanitizeStrategy::Replace;
      p.replacement = "x_0"[support::pick(rng, 3)];
      if (!p.allows(p.replacement)) p.replacement = 'x';
    }
    const int case_mode = static_cast<int>(support::pick(rng, 3));
    p.case_mode = case_mode == 1   ? CaseMode::Upper
                  : case_mode == 2 ? CaseMode::Lower
                                   : CaseMode::Preserve;

    // Allowed set rebuilt from scratch for the reference.
    std::set<unsigned char> allowed;
    for (unsigned char c = 'a'; c <= 'z'; ++c) allowed.insert(c);
    for (unsigned char c = 'A'; c <= 'Z'; ++c) allowed.insert(c);
    for (unsigned char c = '0'; c <= '9'; ++c) allowed.insert(c);
    for (char c : p.extra) allowed.insert(static_cast<unsigned char>(c));

    std::string text;
    const auto len = support::pick(rng, 40);
    for (std::uint64_t i = 0; i < len; ++i) {
      text.push_back(static_cast<char>(support::pick(rng, 256)));
    }

    const SanitizedInput got = sanitize(text, p);
    CHECK(got.cleaned ==
          support::sanitize_ref(text, allowed, replace, p.replacement, case_mode));

    int outside = 0;
    for (char c : text) {
      if (!allowed.count(static_cast<unsigned char>(c))) ++outside;
    }
    CHECK(got.removed_count == outside);

    if (p.strategy == SanitizeStrategy::Strip) {
      CHECK(got.cleaned.size() == text.size() - static_cast<std::size_t>(outside));
    } else {
      CHECK(got.cleaned.size() == text.size());
    }

    // Cleaning is closed (every output character is allowed) and idempotent.
    for (char c : got.cleaned) CHECK(p.allows(c));
    CHECK(sanitize(got.cleaned, p).cleaned == got.cleaned);
    CHECK(sanitize(got.cleaned, p).removed_count == 0);
    ++checked;
  }
  CHECK(checked == 1000);
}

TEST_CASE("sanitize_request rewrites only the targeted fields") {
  Request req;
  req.source = "203.0.113.1:1";
  req.path = "/svc/echo/say";
  req.query = {{"k!ey", "v@l"}, {"q", "ok"}};
  req.headers = {{"user-agent", "net/1.0!"}, {"x-ims-cert", "AA=="}};
  req.body = "bo#dy";
  req.certificate = "AA==";

  SanitizationPolicy p;  // strip, preserve, query+body by default
  SanitizedRequest out = sanitize_request(req, p);
  CHECK(out.request.query[0].first == "k!ey");  // keys are untouched
  CHECK(out.request.query[0].second == "vl");
  CHECK(out.request.query[1].second == "ok");
  CHECK(out.request.body == "body");
  CHECK(out.request.headers == req.headers);  // not a target
  CHECK(out.request.path == req.path);
  CHECK(out.request.certificate == req.certificate);
  CHECK(out.total_removed == 2);

  SanitizationPolicy h = p;
  h.header_values = true;
  SanitizedRequest out2 = sanitize_request(req, h);
  CHECK(out2.request.headers[0].second == "net10");  // '/', '.', '!' dropped
  CHECK(out2.request.headers[1].second == "AA==");   // certificate header is exempt
  CHECK(out2.total_removed == 2 + 3);
}

TEST_CASE("path sanitization drops segments that clean away to nothing") {
  Request req;
  req.source = "s:1";
  req.path = "/a!b/##/c";
  SanitizationPolicy p;
  p.query_values = p.body_text = false;
  p.path_segments = true;
  SanitizedRequest out = sanitize_request(req, p);
  CHECK(out.request.path == "/ab/c");
  CHECK(out.total_removed == 3);

  req.path = "/##/%%";
  CHECK(sanitize_request(req, p).request.path == "/");
  req.path = "/";
  CHECK(sanitize_request(req, p).request.path == "/");
  CHECK(sanitize_request(req, p).total_removed == 0);
}
