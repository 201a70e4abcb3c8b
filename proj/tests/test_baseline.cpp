#include <doctest.h>

#include "refctl/baseline.hpp"
#include "refctl/config.hpp"
#include "refctl/scenario.hpp"

using namespace refctl;
using namespace refctl::baseline;
using doctest::Approx;

TEST_SUITE("baseline") {
  const auto params = thermo::default_params(1).params;

  TEST_CASE("hysteresis branches") {
    HysteresisState h{{0}};
    CHECK(hysteresis_valve_law(Eigen::VectorXd::Constant(1, 5.2), h, params)[0] == 1);
    CHECK(hysteresis_valve_law(Eigen::VectorXd::Constant(1, 2.0), h, params)[0] == 1);
    CHECK(hysteresis_valve_law(Eigen::VectorXd::Constant(1, -0.5), h, params)[0] == 0);
    CHECK(hysteresis_valve_law(Eigen::VectorXd::Constant(1, 2.0), h, params)[0] == 0);
  }

  TEST_CASE("hysteresis is idempotent inside the band") {
    const auto p = thermo::default_params(4).params;
    HysteresisState h{{1, 0, 1, 0}};
    Eigen::VectorXd t(4);
    t << 1.0, 2.0, 3.0, 4.0;
    const auto first = hysteresis_valve_law(t, h, p);
    CHECK(hysteresis_valve_law(t, h, p) == first);
    CHECK(first == BitVector{1, 0, 1, 0});
  }

  TEST_CASE("dead-banded error") {
    CHECK(pi_error(1.9, params) == Approx(0.5));
    CHECK(pi_error(1.5, params) == 0.0);
    CHECK(pi_error(1.0, params) == Approx(-0.4));
  }

  TEST_CASE("PI output") {
    PIState zero;
    CHECK(pi_output(0.0, zero, 60.0, params) == 0.0);
    PIState s;
    CHECK(pi_output(0.5, s, 10.0, params) == Approx(-6.20));
    PIState a, b;
    pi_output(0.3, a, 5.0, params);
    const double twice = pi_output(0.3, a, 5.0, params);
    CHECK(pi_output(0.3, b, 10.0, params) == Approx(twice));
  }

  TEST_CASE("thresholding") {
    const auto p = thermo::default_params().params;
    CHECK(plant::count_on(compressor_thresholding(-3.0, p)) == 0);
    CHECK(plant::count_on(compressor_thresholding(0.0, p)) == 0);
    CHECK(compressor_thresholding(2.4, p) == BitVector{1, 1, 0, 0, 0, 0, 0});
    CHECK(plant::count_on(compressor_thresholding(100.0, p)) == p.num_compressors);
    std::size_t previous = 0;
    for (double u = -2.0; u < 10.0; u += 0.05) {
      const auto on = plant::count_on(compressor_thresholding(u, p));
      CHECK(on >= previous);
      previous = on;
    }
  }

  TEST_CASE("closed loop raises the compressor count when pressure is high") {
    const auto p = thermo::default_params().params;
    PIController pi(p);
    std::size_t on = 0;
    for (int k = 0; k < 5; ++k) on = plant::count_on(pi.update(2.0, 60.0));
    CHECK(on > 0);
    PIController low(p);
    CHECK(plant::count_on(low.update(0.9, 60.0)) == 0);
  }

  TEST_CASE("anti-windup holds the accumulator at saturation") {
    const auto p = thermo::default_params().params;
    PIController pi(p);
    for (int k = 0; k < 50; ++k) pi.update(0.5, 60.0);
    CHECK(pi.state().compressors_on == 0);
    CHECK(pi.state().accumulator == 0.0);
    for (int k = 0; k < 50; ++k) pi.update(2.2, 60.0);
    CHECK(pi.state().compressors_on == p.num_compressors);
    const double held = pi.state().accumulator;
    pi.update(2.2, 60.0);
    CHECK(pi.state().accumulator == held);
  }

  TEST_CASE("8 h closed loop stays inside the sanity envelope") {
    const auto c = default_config();
    const auto run = scenario::run_closed_loop(c, ControllerKind::pi);
    for (const auto& s : run.trajectory.states) {
      CHECK(s.air_temp.maxCoeff() <= 6.0);
      CHECK(s.air_temp.minCoeff() >= -1.0);
    }
    CHECK(run.metrics.average_power_kw >= 9.0);
    CHECK(run.metrics.average_power_kw <= 13.0);
  }
}
