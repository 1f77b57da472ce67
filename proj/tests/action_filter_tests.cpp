#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sentinel/action_filter.hpp"
#include "support/testbed.hpp"

using namespace sentinel;

namespace {

ActionRegistry must_registry(const std::string& text) {
  auto res = parse_registry(text);
  REQUIRE_MESSAGE(res.registry.has_value(),
                  (res.error ? res.error->message : "no error"));
  return *res.registry;
}

Request routed(const std::string& service, const std::string& action) {
  Request req;
  req.source = "203.0.113.7:2000";
  req.service = service;
  req.action = action;
  req.path = "/svc/" + service + "/" + action;
  return req;
}

}  // namespace

TEST_CASE("registry lines parse, lowercase and deduplicate") {
  ActionRegistry reg = must_registry(
      "# closed list\n"
      "echo ping\n"
      "TRADING GET_QUOTE   # inline comment\n"
      "\n"
      "echo ping\n"
      "banking check_balance\r\n");
  CHECK(reg.entries.size() == 3);
  CHECK(reg.contains("echo", "ping"));
  CHECK(reg.contains("trading", "get_quote"));
  CHECK(reg.contains("banking", "check_balance"));
  CHECK_FALSE(reg.contains("echo", "say"));
  CHECK(reg.services() == std::set<std::string>{"banking", "echo", "trading"});
}

TEST_CASE("field-count and name errors carry the line number") {
  auto res = parse_registry("echo ping\njust-one\n");
  REQUIRE(res.error.has_value());
  CHECK(res.error->line == 2);
  CHECK(res.error->message == "expected \"<service> <action>\", got 1 fields");

  res = parse_registry("a b c\n");
  CHECK(res.error->message == "expected \"<service> <action>\", got 3 fields");

  res = parse_registry("echo ping\n\n\nsvc ac.tion\n");
  REQUIRE(res.error.has_value());
  CHECK(res.error->line == 4);
  CHECK(res.error->message == "names must be [a-z0-9_-], got \"svc ac.tion\"");

  CHECK(parse_registry("sv/c act\n").error.has_value());
  CHECK_FALSE(parse_registry("s-v_c9 a-c_t0\n").error.has_value());
}

TEST_CASE("the registry version hashes the text") {
  CHECK(must_registry("echo ping\n").version == must_registry("echo ping\n").version);
  CHECK(must_registry("echo ping\n").version.size() == 64);
  ActionRegistry a = must_registry("echo ping\n");
  ActionRegistry b = must_registry("# note\necho ping\n");
  CHECK(a.entries == b.entries);
  CHECK(a.version != b.version);
}

TEST_CASE("an empty registry parses and refuses everything") {
  ActionRegistry reg = must_registry("");
  CHECK(reg.entries.empty());
  Verdict v = check_action(routed("echo", "ping"), reg);
  CHECK(v.denied());
  CHECK(v.layer == Layer::ActionFilter);
  CHECK(v.reason == "unknown-action");
}

TEST_CASE("check_action spells out what it decided") {
  ActionRegistry reg = must_registry("echo ping\n");

  Verdict ok = check_action(routed("echo", "ping"), reg);
  CHECK(ok.allowed());
  CHECK(ok.reason == "action-known");
  CHECK(ok.detail == "echo.ping");

  Verdict miss = check_action(routed("echo", "shout"), reg);
  CHECK(miss.denied());
  CHECK(miss.reason == "unknown-action");
  CHECK(miss.detail == "echo.shout is not available");

  Verdict unrouted = check_action(routed("", ""), reg);
  CHECK(unrouted.denied());
  CHECK(unrouted.detail == "request names no service action");
  CHECK(check_action(routed("echo", ""), reg).denied());
  CHECK(check_action(routed("", "ping"), reg).denied());
}

TEST_CASE("all 64 subsets of a six-pair universe behave as pure membership") {
  const std::vector<std::pair<std::string, std::string>> universe = {
      {"alpha", "read"},  {"alpha", "write"}, {"beta", "read"},
      {"beta", "delete"}, {"gamma", "ping"},  {"gamma", "halt"},
  };

  for (unsigned mask = 0; mask < 64; ++mask) {
    std::string text = "# subset " + std::to_string(mask) + "\n";
    std::set<std::pair<std::string, std::string>> expect;
    for (std::size_t i = 0; i < universe.size(); ++i) {
      if (mask & (1u << i)) {
        text += universe[i].first + " " + universe[i].second + "\n";
        expect.insert(universe[i]);
      }
    }
    ActionRegistry reg = must_registry(text);
    CHECK(reg.entries == expect);

    for (const auto& [svc, act] : universe) {
      const bool member = expect.count({svc, act}) > 0;
      CHECK(reg.contains(svc, act) == member);
      const Verdict v = check_action(routed(svc, act), reg);
      CHECK(v.allowed() == member);
      CHECK(v.layer == Layer::ActionFilter);
    }
    // A pair outside the universe never becomes available.
    CHECK_FALSE(reg.contains("alpha", "delete"));
    CHECK(check_action(routed("delta", "read"), reg).denied());
  }
}

TEST_CASE("load_registry_file reads files and reports missing ones") {
  auto missing = load_registry_file("/nonexistent-registry.txt");
  REQUIRE(missing.error.has_value());
  CHECK(missing.error->message == "cannot open /nonexistent-registry.txt");
  CHECK(missing.error->line == 0);

  const std::string dir = support::scratch_dir();
  support::write_file(dir + "/reg.txt", "echo ping\necho say\n");
  auto ok = load_registry_file(dir + "/reg.txt");
  REQUIRE(ok.registry.has_value());
  CHECK(ok.registry->entries.size() == 2);
}
