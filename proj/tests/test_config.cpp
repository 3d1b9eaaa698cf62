#include <doctest.h>

#include <stdexcept>
#include <string>
#include <vector>

#include "resset/config.hpp"

using namespace resset;

TEST_SUITE("config") {

TEST_CASE("parses keys, values, comments and blanks") {
  Config cfg = Config::from_string(
      "# run knobs\n"
      "lr = 0.05\n"
      "\n"
      "epochs=3   # trailing comment\n"
      "name = tiny run\n"
      "flag = true\n"
      "big = 18446744073709551615\n");
  CHECK(cfg.get_double("lr", 0.0) == 0.05);
  CHECK(cfg.get_int("epochs", 0) == 3);
  CHECK(cfg.get_string("name", "") == "tiny run");
  CHECK(cfg.get_bool("flag", false));
  CHECK(cfg.get_u64("big", 0) == 18446744073709551615ULL);
  CHECK(cfg.has("lr"));
  CHECK_FALSE(cfg.has("missing"));
}

TEST_CASE("fallbacks apply only to absent keys") {
  Config cfg = Config::from_string("a = 1\n");
  CHECK(cfg.get_int("a", 99) == 1);
  CHECK(cfg.get_int("b", 99) == 99);
  CHECK(cfg.get_double("c", 2.5) == 2.5);
  CHECK(cfg.get_bool("d", true));
}

TEST_CASE("duplicate keys are an error") {
  CHECK_THROWS_AS(Config::from_string("x = 1\nx = 2\n"), std::invalid_argument);
}

TEST_CASE("malformed values fail loudly instead of truncating") {
  Config cfg = Config::from_string("n = 3.5\ns = hello\nhalf = 12abc\n");
  CHECK_THROWS_AS(cfg.get_int("n", 0), std::invalid_argument);
  CHECK_THROWS_AS(cfg.get_double("s", 0.0), std::invalid_argument);
  CHECK_THROWS_AS(cfg.get_int("half", 0), std::invalid_argument);
  CHECK_THROWS_AS(cfg.get_bool("s", false), std::invalid_argument);
}

TEST_CASE("lines without an equals sign are rejected") {
  CHECK_THROWS_AS(Config::from_string("just some words\n"), std::invalid_argument);
}

TEST_CASE("require_known names the stray key") {
  Config cfg = Config::from_string("lr = 1\ntypo_key = 2\n");
  std::vector<std::string> known = {"lr", "epochs"};
  CHECK_THROWS_WITH_AS(cfg.require_known(known), "config: unknown key 'typo_key'",
                       std::invalid_argument);
  Config ok = Config::from_string("lr = 1\n");
  CHECK_NOTHROW(ok.require_known(known));
}

TEST_CASE("missing file is an error") {
  CHECK_THROWS_AS(Config::load("/nonexistent/path.cfg"), std::runtime_error);
}

TEST_CASE("set overrides and inserts") {
  Config cfg = Config::from_string("a = 1\n");
  cfg.set("a", "2");
  cfg.set("b", "3");
  CHECK(cfg.get_int("a", 0) == 2);
  CHECK(cfg.get_int("b", 0) == 3);
}

}  // TEST_SUITE
