#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <regex>
#include <string>

#include "sentinel/domain.hpp"
#include "sentinel/rng.hpp"
#include "support/oracles.hpp"
#include "support/testbed.hpp"

using namespace sentinel;

namespace {

RawRequest raw_at(std::string path) {
  RawRequest raw;
  raw.source = "203.0.113.9:4411";
  raw.path = std::move(path);
  return raw;
}

Request must_canon(const RawRequest& raw, Millis now = 1000) {
  auto outcome = canonicalize_request(raw, now);
  REQUIRE_MESSAGE(outcome.ok(), outcome.error);
  return *outcome.request;
}

std::string must_fail(const RawRequest& raw) {
  auto outcome = canonicalize_request(raw, 1000);
  REQUIRE_FALSE(outcome.ok());
  CHECK(outcome.error.rfind("malformed request: ", 0) == 0);
  return outcome.error;
}

}  // namespace

TEST_CASE("canonical request carries source, body, certificate and timestamp") {
  RawRequest raw = raw_at("/svc/echo/ping?a=1");
  raw.body = std::string("bin\0ary", 7);
  raw.certificate = "Zm9v";
  Request req = must_canon(raw, 777);
  CHECK(req.source == "203.0.113.9:4411");
  CHECK(req.body == std::string("bin\0ary", 7));
  REQUIRE(req.certificate.has_value());
  CHECK(*req.certificate == "Zm9v");
  CHECK(req.received_at == 777);
  CHECK(req.path == "/svc/echo/ping");
}

TEST_CASE("request ids are unique and follow the fixed-width format") {
  const std::regex shape("req-[0-9]{12}");
  Request a = must_canon(raw_at("/"));
  Request b = must_canon(raw_at("/"));
  CHECK(std::regex_match(a.request_id, shape));
  CHECK(std::regex_match(b.request_id, shape));
  CHECK(a.request_id != b.request_id);
  CHECK(a.request_id < b.request_id);  // zero-padded, so lexicographic = numeric
}

TEST_CASE("percent escapes decode exactly once") {
  // "%2541" is the encoding of "%41"; a double decoder would produce "A"
  // and re-open the alias hole the canonical form exists to close.
  CHECK(must_canon(raw_at("/a%2541")).path == "/a%41");
  CHECK(must_canon(raw_at("/p?q=%2541")).query.front().second == "%41");
  CHECK(must_canon(raw_at("/a%41")).path == "/aA");
}

TEST_CASE("both hex cases are accepted in escapes") {
  CHECK(must_canon(raw_at("/x%4a")).path == "/xJ");
  CHECK(must_canon(raw_at("/x%4A")).path == "/xJ");
  CHECK(must_canon(raw_at("/p?k=%3d")).query.front().second == "=");
}

TEST_CASE("plus means space in the query but not in the path") {
  Request req = must_canon(raw_at("/a+b?c+d=e+f"));
  CHECK(req.path == "/a+b");
  REQUIRE(req.query.size() == 1);
  CHECK(req.query[0].first == "c d");
  CHECK(req.query[0].second == "e f");
}

TEST_CASE("malformed escapes are rejected with a reason") {
  CHECK(must_fail(raw_at("/a%")) == "malformed request: truncated percent escape in path");
  CHECK(must_fail(raw_at("/a%4")) == "malformed request: truncated percent escape in path");
  CHECK(must_fail(raw_at("/a%zz")) == "malformed request: invalid percent escape in path");
  CHECK(must_fail(raw_at("/p?q=%")) == "malformed request: truncated percent escape in query");
  CHECK(must_fail(raw_at("/p?q=%g1")) == "malformed request: invalid percent escape in query");
}

TEST_CASE("dot segments are resolved on a stack") {
  CHECK(must_canon(raw_at("/a/b/../c")).path == "/a/c");
  CHECK(must_canon(raw_at("/a/./b")).path == "/a/b");
  CHECK(must_canon(raw_at("/a/..")).path == "/");
  CHECK(must_canon(raw_at("/")).path == "/");
  CHECK(must_canon(raw_at("/.")).path == "/");
  CHECK(must_canon(raw_at("//a///b//")).path == "/a/b");
  CHECK(must_canon(raw_at("/a/")).path == "/a");
  // Encoded dots decode before resolution, so they cannot smuggle a "..".
  CHECK(must_canon(raw_at("/a/%2e%2e")).path == "/");
  CHECK(must_canon(raw_at("/a%2Fb")).path == "/a/b");
}

TEST_CASE("paths that escape the root are refused") {
  CHECK(must_fail(raw_at("/..")) == "malformed request: path resolves above root");
  CHECK(must_fail(raw_at("/a/../../b")) == "malformed request: path resolves above root");
  CHECK(must_fail(raw_at("/%2e%2e")) == "malformed request: path resolves above root");
}

TEST_CASE("empty and relative inputs are refused") {
  RawRequest no_source;
  no_source.path = "/";
  CHECK(canonicalize_request(no_source, 0).error == "malformed request: empty source");
  CHECK(must_fail(raw_at("")) == "malformed request: empty path");
  CHECK(must_fail(raw_at("a/b")) == "malformed request: path must be absolute");
  CHECK(must_fail(raw_at("?q=1")) == "malformed request: path must be absolute");
}

TEST_CASE("query pairs keep order, allow duplicates and default to empty values") {
  Request req = must_canon(raw_at("/p?a=1&b=2&&c&a=3&=x"));
  REQUIRE(req.query.size() == 5);
  CHECK(req.query[0] == std::pair<std::string, std::string>("a", "1"));
  CHECK(req.query[1] == std::pair<std::string, std::string>("b", "2"));
  CHECK(req.query[2] == std::pair<std::string, std::string>("c", ""));
  CHECK(req.query[3] == std::pair<std::string, std::string>("a", "3"));
  CHECK(req.query[4] == std::pair<std::string, std::string>("", "x"));
  CHECK(must_canon(raw_at("/p?")).query.empty());
  CHECK(must_canon(raw_at("/p")).query.empty());

  // A second '?' belongs to the query text, not a new delimiter.
  Request two = must_canon(raw_at("/p?a=b?c"));
  REQUIRE(two.query.size() == 1);
  CHECK(two.query[0].second == "b?c");
}

TEST_CASE("header names are validated and lowercased, values kept verbatim") {
  RawRequest raw = raw_at("/");
  raw.headers = {{"X-Trace", "Ab C\xc3\xa9"}, {"HOST", "example"}, {"host", "dup"}};
  Request req = must_canon(raw);
  REQUIRE(req.headers.size() == 3);
  CHECK(req.headers[0] == std::pair<std::string, std::string>("x-trace", "Ab C\xc3\xa9"));
  CHECK(req.headers[1] == std::pair<std::string, std::string>("host", "example"));
  CHECK(req.headers[2] == std::pair<std::string, std::string>("host", "dup"));

  RawRequest bad = raw_at("/");
  bad.headers = {{"bad name", "v"}};
  CHECK(must_fail(bad) == "malformed request: invalid header name");
  bad.headers = {{"", "v"}};
  CHECK(must_fail(bad) == "malformed request: empty header name");
  bad.headers = {{"tab\tname", "v"}};
  CHECK(must_fail(bad) == "malformed request: invalid header name");
}

TEST_CASE("service routes need exactly /svc/<service>/<action>") {
  Request hit = must_canon(raw_at("/svc/Trading/Get_Quote?x=1"));
  CHECK(hit.service == "trading");
  CHECK(hit.action == "get_quote");
  CHECK(hit.path == "/svc/Trading/Get_Quote");  // path keeps its case

  for (const char* miss :
       {"/svc/a", "/svc/a/", "/svc//b", "/svc/a/b/c", "/healthz", "/", "/svcx/a/b"}) {
    Request req = must_canon(raw_at(miss));
    CHECK_MESSAGE(req.service.empty(), miss);
    CHECK_MESSAGE(req.action.empty(), miss);
  }

  // Routing happens after dot-segment resolution.
  Request resolved = must_canon(raw_at("/other/../svc/echo/ping"));
  CHECK(resolved.service == "echo");
  CHECK(resolved.action == "ping");
}

TEST_CASE("url_encode emits uppercase escapes for everything non-unreserved") {
  CHECK(url_encode("AZaz09-._~") == "AZaz09-._~");
  CHECK(url_encode(" ") == "%20");
  CHECK(url_encode("/") == "%2F");
  CHECK(url_encode("a+b") == "a%2Bb");
  CHECK(url_encode("\xff") == "%FF");
  CHECK(url_encode("") == "");
}

TEST_CASE("url_encode then canonicalize returns the original bytes") {
  SeededRandom rng(11);
  for (int i = 0; i < 500; ++i) {
    std::string plain;
    const auto len = support::pick(rng, 24);
    for (std::uint64_t j = 0; j < len; ++j) {
      plain.push_back(static_cast<char>(support::pick(rng, 256)));
    }
    const std::string enc = url_encode(plain);

    // The reference decoder and the production query parser must agree.
    auto ref = support::percent_decode(enc, true);
    REQUIRE(ref.has_value());
    CHECK(*ref == plain);

    Request req = must_canon(raw_at("/p?q=" + enc));
    REQUIRE(req.query.size() == 1);
    CHECK(req.query[0].second == plain);
  }
}

TEST_CASE("audit lines escape tabs and newlines in the detail column") {
  ThreatEvent ev;
  ev.seq = 42;
  ev.at = 1234;
  ev.kind = ThreatKind::RuleMatch;
  ev.source = "10.0.0.1:99";
  ev.detail = "a\tb\nc";
  CHECK(audit_line(ev) == "42\t1234\tRuleMatch\t10.0.0.1:99\ta\\tb\\nc");

  ev.detail = "plain";
  ev.kind = ThreatKind::Forgery;
  CHECK(audit_line(ev) == "42\t1234\tForgery\t10.0.0.1:99\tplain");
}

TEST_CASE("threat kinds have stable names") {
  CHECK(std::string(to_string(ThreatKind::Replay)) == "Replay");
  CHECK(std::string(to_string(ThreatKind::TamperedRecord)) == "TamperedRecord");
  CHECK(std::string(to_string(ThreatKind::BreakerTrip)) == "BreakerTrip");
  CHECK(std::string(to_string(Layer::RuleEngine)) == "RuleEngine");
  CHECK(std::string(to_string(Layer::Breaker)) == "Breaker");
}

TEST_CASE("audit log assigns sequence numbers from one") {
  AuditLog log;
  auto a = log.append(ThreatKind::Forgery, 10, "s1", "d1");
  auto b = log.append(ThreatKind::Replay, 20, "s2", "d2");
  CHECK(a.seq == 1);
  CHECK(b.seq == 2);
  CHECK_FALSE(a.io_error.has_value());
  CHECK(log.size() == 2);

  auto snap = log.snapshot();
  REQUIRE(snap.size() == 2);
  CHECK(snap[0].kind == ThreatKind::Forgery);
  CHECK(snap[0].seq == 1);
  CHECK(snap[1].detail == "d2");

  REQUIRE(log.entry(2).has_value());
  CHECK(log.entry(2)->source == "s2");
  CHECK_FALSE(log.entry(0).has_value());
  CHECK_FALSE(log.entry(3).has_value());
  CHECK(log.io_failures() == 0);
}

TEST_CASE("audit mirror appends one escaped line per event") {
  const std::string dir = support::scratch_dir();
  const std::string path = dir + "/audit.log";
  AuditLog log(path);
  log.append(ThreatKind::RateExceeded, 5, "a:1", "first");
  log.append(ThreatKind::Denied, 6, "b:2", "tab\there");
  CHECK(support::read_file(path) ==
        "1\t5\tRateExceeded\ta:1\tfirst\n"
        "2\t6\tDenied\tb:2\ttab\\there\n");
  CHECK(log.io_failures() == 0);
}

TEST_CASE("mirror write failures are counted but never drop the entry") {
  AuditLog log("/nonexistent-dir-for-sentinel-tests/audit.log");
  auto outcome = log.append(ThreatKind::Forgery, 1, "s", "d");
  CHECK(outcome.seq == 1);
  REQUIRE(outcome.io_error.has_value());
  CHECK(log.io_failures() == 1);
  CHECK(log.size() == 1);  // in-memory record survives
  log.append(ThreatKind::Forgery, 2, "s", "d");
  CHECK(log.io_failures() == 2);
}
