#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>
#include <vector>

#include "sentinel/config.hpp"
#include "support/testbed.hpp"

using namespace sentinel;

namespace {

Config must_parse(const std::string& text) {
  std::string err;
  auto cfg = Config::parse(text, &err);
  REQUIRE_MESSAGE(cfg.has_value(), err);
  return *cfg;
}

}  // namespace

TEST_CASE("key=value lines are trimmed and stored") {
  Config cfg = must_parse("  a = hello world \n\tb\t=\t2\nempty =\n");
  CHECK(cfg.get_str("a") == "hello world");
  CHECK(cfg.get_str("b") == "2");
  CHECK(cfg.has("empty"));
  CHECK(cfg.get_str("empty") == "");
  CHECK_FALSE(cfg.has("missing"));
  CHECK(cfg.get_str("missing", "fb") == "fb");
}

TEST_CASE("the split happens at the first equals sign") {
  Config cfg = must_parse("url = http://h/p?a=b=c\n");
  CHECK(cfg.get_str("url") == "http://h/p?a=b=c");
}

TEST_CASE("duplicate keys: last one wins") {
  Config cfg = must_parse("k = 1\nk = 2\nk = 3\n");
  CHECK(cfg.get_str("k") == "3");
  CHECK(cfg.entries().size() == 1);
}

TEST_CASE("comments are full lines only, so values may contain '#'") {
  Config cfg = must_parse("# leading comment\n   # indented comment\nk = a#b\n");
  CHECK(cfg.get_str("k") == "a#b");
  CHECK(cfg.entries().size() == 1);
}

TEST_CASE("blank lines are skipped") {
  Config cfg = must_parse("\n\n  \t \nk = v\n\n");
  CHECK(cfg.entries().size() == 1);
}

TEST_CASE("a line without equals fails with its line number") {
  std::string err;
  CHECK_FALSE(Config::parse("a = 1\nbare line\n", &err).has_value());
  CHECK(err == "config line 2: expected key=value");

  CHECK_FALSE(Config::parse("a = 1\nb = 2\n\n# c\noops\n", &err).has_value());
  CHECK(err == "config line 5: expected key=value");
}

TEST_CASE("an empty key fails with its line number") {
  std::string err;
  CHECK_FALSE(Config::parse("= v\n", &err).has_value());
  CHECK(err == "config line 1: empty key");
}

TEST_CASE("integers parse strictly or fall back") {
  Config cfg = must_parse(
      "good = 42\nneg = -7\nbig = 9223372036854775807\n"
      "trail = 42x\nfloaty = 4.2\nempty =\nhex = 0x10\nspaced = 4 2\n");
  CHECK(cfg.get_i64("good", -1) == 42);
  CHECK(cfg.get_i64("neg", -1) == -7);
  CHECK(cfg.get_i64("big", -1) == 9223372036854775807LL);
  CHECK(cfg.get_i64("trail", -1) == -1);
  CHECK(cfg.get_i64("floaty", -1) == -1);
  CHECK(cfg.get_i64("empty", -1) == -1);
  CHECK(cfg.get_i64("hex", -1) == -1);
  CHECK(cfg.get_i64("spaced", -1) == -1);
  CHECK(cfg.get_i64("missing", 5) == 5);
}

TEST_CASE("booleans accept the usual spellings, case-insensitively") {
  Config cfg = must_parse(
      "t1 = true\nt2 = 1\nt3 = YES\nt4 = On\n"
      "f1 = false\nf2 = 0\nf3 = No\nf4 = OFF\njunk = maybe\n");
  for (const char* k : {"t1", "t2", "t3", "t4"}) CHECK(cfg.get_bool(k, false));
  for (const char* k : {"f1", "f2", "f3", "f4"}) CHECK_FALSE(cfg.get_bool(k, true));
  CHECK(cfg.get_bool("junk", true));
  CHECK_FALSE(cfg.get_bool("junk", false));
  CHECK(cfg.get_bool("missing", true));
}

TEST_CASE("lists split on commas, trim items and drop empties") {
  Config cfg = must_parse("l = a, b ,,c,\nempty =\nsolo = x\n");
  CHECK(cfg.get_list("l") == std::vector<std::string>{"a", "b", "c"});
  CHECK(cfg.get_list("empty").empty());
  CHECK(cfg.get_list("solo") == std::vector<std::string>{"x"});
  CHECK(cfg.get_list("missing").empty());
}

TEST_CASE("prefix queries strip the prefix") {
  Config cfg = must_parse(
      "services.echo.actions = ping\nservices.trading.actions = get_quote\n"
      "service = not-a-prefix-match\nservices. = degenerate\n");
  auto got = cfg.with_prefix("services.");
  REQUIRE(got.size() == 2);
  CHECK(got.at("echo.actions") == "ping");
  CHECK(got.at("trading.actions") == "get_quote");
  CHECK(cfg.with_prefix("nothing.").empty());
}

TEST_CASE("relative paths resolve against the config file directory") {
  const std::string dir = support::scratch_dir();
  support::write_file(dir + "/app.conf",
                      "rel = data/rules.wsr\nabs = /etc/hosts\nnone =\n");
  std::string err;
  auto cfg = Config::load_file(dir + "/app.conf", &err);
  REQUIRE_MESSAGE(cfg.has_value(), err);
  CHECK(cfg->get_path("rel") == dir + "/data/rules.wsr");
  CHECK(cfg->get_path("abs") == "/etc/hosts");
  CHECK(cfg->get_path("none") == "");
  CHECK(cfg->get_path("missing", "fallback.txt") == dir + "/fallback.txt");
  CHECK(cfg->resolve_path("x") == dir + "/x");

  // Parsed-from-text configs have no base directory; values pass through.
  Config bare = must_parse("rel = data/rules.wsr\n");
  CHECK(bare.get_path("rel") == "data/rules.wsr");
}

TEST_CASE("load_file reports unreadable paths") {
  std::string err;
  CHECK_FALSE(Config::load_file("/nonexistent-sentinel.conf", &err).has_value());
  CHECK(err == "cannot open config file: /nonexistent-sentinel.conf");
}

TEST_CASE("windows line endings are tolerated") {
  Config cfg = must_parse("a = 1\r\nb = 2\r\n");
  CHECK(cfg.get_str("a") == "1");
  CHECK(cfg.get_str("b") == "2");
}
