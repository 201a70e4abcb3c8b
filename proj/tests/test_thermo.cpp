#include <doctest.h>

#include <cmath>
#include <limits>

#include "refctl/errors.hpp"
#include "refctl/thermo.hpp"

using namespace refctl;
using namespace refctl::thermo;
using doctest::Approx;

TEST_SUITE("thermo") {
  TEST_CASE("property fits at the reference and at 1 bar") {
    CHECK(evaporation_temperature(1.4) == Approx(-18.8215).epsilon(1e-5));
    CHECK(evaporation_temperature(1.0) == Approx(-26.3309).epsilon(1e-6));
    CHECK(suction_density(1.4) == Approx(6.8300).epsilon(1e-5));
    CHECK(suction_density(1.0) == Approx(4.9871).epsilon(1e-6));
    CHECK(density_pressure_gradient(1.4) == Approx(5.1511).epsilon(1e-5));
    CHECK(density_pressure_gradient(1.0) == Approx(5.1907).epsilon(1e-6));
    CHECK(compressor_specific_power(1.4) == Approx(3.9290e5).epsilon(1e-4));
    CHECK(compressor_specific_power(1.0) == Approx(3.3031e5).epsilon(1e-6));
    CHECK(evaporation_enthalpy(1.4) == Approx(2.1028e5).epsilon(1e-4));
    CHECK(evaporation_enthalpy(1.0) == Approx(2.1501e5).epsilon(1e-6));
  }

  TEST_CASE("constant terms as pressure approaches zero") {
    const double p = 1e-12;
    CHECK(suction_density(p) == Approx(0.3798));
    CHECK(density_pressure_gradient(p) == Approx(5.4817));
    CHECK(compressor_specific_power(p) == Approx(1.2189e5));
    CHECK(evaporation_enthalpy(p) == Approx(2.2988e5));
  }

  TEST_CASE("quadratic through three samples recovers the coefficients") {
    const double x[3] = {0.8, 1.4, 2.0};
    double y[3];
    for (int i = 0; i < 3; ++i) y[i] = evaporation_temperature(x[i]);
    // Divided differences give the leading coefficient exactly for a quadratic.
    const double d01 = (y[1] - y[0]) / (x[1] - x[0]);
    const double d12 = (y[2] - y[1]) / (x[2] - x[1]);
    const double a = (d12 - d01) / (x[2] - x[0]);
    const double b = d01 - a * (x[0] + x[1]);
    const double c = y[0] - a * x[0] * x[0] - b * x[0];
    CHECK(a == Approx(-4.3544));
    CHECK(b == Approx(29.2240));
    CHECK(c == Approx(-51.2005));
  }

  TEST_CASE("sign constraints over the operating range") {
    for (int k = 0; k <= 20; ++k) {
      const double p = kOperatingPressureMin + (kOperatingPressureMax - kOperatingPressureMin) * k / 20.0;
      CHECK(evaporation_temperature(p) < 0.0);
      CHECK(suction_density(p) > 0.0);
      CHECK(density_pressure_gradient(p) > 0.0);
      CHECK(compressor_specific_power(p) > 0.0);
    }
  }

  TEST_CASE("gradient fit is consistent with the density fit") {
    for (double p = 0.8; p <= 2.0 + 1e-9; p += 0.1) {
      const double fd = (suction_density(p + 1e-4) - suction_density(p - 1e-4)) / 2e-4;
      CHECK(std::abs(density_pressure_gradient(p) - fd) <= 0.25 * fd);
    }
  }

  TEST_CASE("non-positive or non-finite pressure is a domain error") {
    CHECK_THROWS_AS(evaporation_temperature(0.0), DomainError);
    CHECK_THROWS_AS(suction_density(-1.0), DomainError);
    CHECK_THROWS_AS(compressor_specific_power(std::numeric_limits<double>::quiet_NaN()), DomainError);
    CHECK_THROWS_AS(density_pressure_gradient(std::numeric_limits<double>::infinity()), DomainError);
  }

  TEST_CASE("default parameters") {
    const auto unit = default_params();
    const auto& p = unit.params;
    CHECK(p.k_food_air == 300.0);
    CHECK(p.k_amb_air == 275.0);
    CHECK(p.suction_pressure_ref_bar == 1.4);
    CHECK(p.dead_band_bar == 0.3);
    CHECK(p.num_cases == 10);
    CHECK(p.num_compressors == 7);
    CHECK(p.control_period_s == 60.0);
    CHECK(p.food_mass_kg.at(3) == 200.0);
    CHECK(p.wall_mass_kg.at(0) == 260.0);
    CHECK(p.wall_heat_capacity.at(0) == 385.0);
    CHECK(p.compressor_unit_flow() == Approx(0.0162));
    CHECK(p.violations().empty());
    CHECK(unit.topology.violations().empty());
    CHECK(unit.topology(0, 1) == 500.0);
    CHECK(unit.topology(0, 2) == 0.0);
    CHECK(unit.topology.row_sum(0) == 500.0);
    CHECK(unit.topology.row_sum(5) == 1000.0);
  }

  TEST_CASE("invalid overrides name each violated invariant") {
    auto p = default_params().params;
    p.control_period_s = 0.0;
    p.volumetric_efficiency = 1.5;
    p.temp_min_c[2] = 6.0;
    const auto v = p.violations();
    CHECK(v.size() == 3);
    CHECK_THROWS_AS(p.validate(), ConfigError);
  }

  TEST_CASE("topology validation") {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3, 3);
    m(0, 1) = 10.0;
    CHECK_FALSE(Topology(m).violations().empty());
    m(1, 0) = 10.0;
    CHECK(Topology(m).violations().empty());
    m(2, 2) = 1.0;
    CHECK_FALSE(Topology(m).violations().empty());
    CHECK(Topology::ring(4, 5.0).row_sum(0) == 10.0);
    CHECK(Topology::isolated(4).matrix().isZero());
  }
}
