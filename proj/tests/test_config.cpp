#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "eli/config.hpp"
#include "eli/error.hpp"

using namespace eli;

TEST_CASE("config parsing") {
  const Config c = Config::parse(
      "# settings\n"
      "encoder.dim = 128   # wider\n"
      "\n"
      "  tagger.hidden=16\n"
      "models.tagger = out/tagger.json\n"
      "inference.include_comparator = true\n"
      "evidence.threshold = 0.25\n");
  CHECK(c.get_uint("encoder.dim", 64) == 128);
  CHECK(c.get_uint("tagger.hidden", 0) == 16);
  CHECK(c.get_string("models.tagger", "") == "out/tagger.json");
  CHECK(c.get_bool("inference.include_comparator", false));
  CHECK(c.get_double("evidence.threshold", 0.5) == 0.25);
  CHECK(c.get_double("missing", 0.75) == 0.75);
  CHECK_FALSE(c.has("missing"));
  CHECK(c.values().size() == 5);
}

TEST_CASE("config grids") {
  Config c;
  c.set("a", "0.5, 0.7,0.9");
  c.set("b", "0.5:0.95:0.05");
  c.set("c", "0.5:0.4:0.1");
  CHECK(c.get_grid("a", {}) == std::vector<double>{0.5, 0.7, 0.9});
  const auto b = c.get_grid("b", {});
  REQUIRE(b.size() == 10);
  CHECK(b.front() == 0.5);
  CHECK(b[1] == 0.55);
  CHECK(b.back() == 0.95);
  CHECK(c.get_grid("c", {}).empty());
  CHECK(c.get_grid("z", {0.1}) == std::vector<double>{0.1});
  c.set("d", "0:1");
  CHECK_THROWS_AS(c.get_grid("d", {}), ParseError);
  c.set("e", "0:1:0");
  CHECK_THROWS_AS(c.get_grid("e", {}), ParseError);
}

TEST_CASE("config errors") {
  CHECK_THROWS_WITH_AS(Config::parse("a = 1\nno equals sign\n"), doctest::Contains("line 2"), ParseError);
  CHECK_THROWS_WITH_AS(Config::parse(" = 3\n"), doctest::Contains("line 1"), ParseError);
  Config c;
  c.set("n", "12x");
  c.set("u", "-3");
  c.set("b", "yes");
  CHECK_THROWS_AS(c.get_double("n", 0), ParseError);
  CHECK_THROWS_AS(c.get_uint("u", 0), ParseError);
  CHECK_THROWS_AS(c.get_bool("b", false), ParseError);
  CHECK_THROWS_AS(Config::load("/nonexistent/eli.cfg"), IoError);

  const auto path = std::filesystem::temp_directory_path() / "eli_unit.cfg";
  std::ofstream(path) << "seed = 9\n";
  CHECK(Config::load(path).get_uint("seed", 0) == 9);
}
