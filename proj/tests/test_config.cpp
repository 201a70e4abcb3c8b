#include <doctest.h>

#include <sstream>

#include "refctl/config.hpp"
#include "refctl/errors.hpp"

using namespace refctl;

TEST_SUITE("config") {
  TEST_CASE("defaults round-trip bit-exactly") {
    const auto c = default_config();
    const auto text = format_config(c);
    const auto back = parse_config(text);
    CHECK(back.params.food_mass_kg == c.params.food_mass_kg);
    CHECK(back.params.pi_ki == c.params.pi_ki);
    CHECK(back.params.compressor_volume_m3_per_s == c.params.compressor_volume_m3_per_s);
    CHECK(back.topology.matrix() == c.topology.matrix());
    CHECK(back.controller.delta == c.controller.delta);
    CHECK(format_config(back) == text);
  }

  TEST_CASE("awkward doubles survive the round trip") {
    auto c = default_config();
    c.params.food_mass_kg[4] = 0.1 + 0.2;
    c.params.k_air_evap = 1.0 / 3.0;
    const auto back = parse_config(format_config(c));
    CHECK(back.params.food_mass_kg[4] == c.params.food_mass_kg[4]);
    CHECK(back.params.k_air_evap == c.params.k_air_evap);
  }

  TEST_CASE("per-case keys accept a scalar or a list") {
    auto c = parse_config("num_cases = 3\nfood_mass_kg = 150\ntemp_max_c = 4, 5, 6\n");
    CHECK(c.params.food_mass_kg == std::vector<double>{150, 150, 150});
    CHECK(c.params.temp_max_c == std::vector<double>{4, 5, 6});
    CHECK(c.topology.size() == 3);
  }

  TEST_CASE("unknown keys and bad values are all reported") {
    try {
      parse_config("bogus = 1\ncontrol_period_s = 0\nk_food_air = abc\n");
      FAIL("expected a configuration error");
    } catch (const ConfigError& e) {
      CHECK(e.violations().size() >= 3);
    }
  }

  TEST_CASE("explicit topology matrix") {
    auto c = parse_config("num_cases = 2\ntopology = matrix\ntopology_matrix = 0, 7; 7, 0\n");
    CHECK(c.topology(0, 1) == 7.0);
    CHECK_THROWS_AS(parse_config("num_cases = 2\ntopology = matrix\ntopology_matrix = 0, 7; 3, 0\n"), ConfigError);
  }

  TEST_CASE("controller names") {
    CHECK(parse_controller("submodular") == ControllerKind::greedy);
    CHECK(parse_controller("exhaustive") == ControllerKind::oracle);
    CHECK_FALSE(parse_controller("mpc").has_value());
  }

  TEST_CASE("missing file is a configuration error") {
    CHECK_THROWS_AS(load_config("/nonexistent/refctl.cfg"), ConfigError);
  }
}
