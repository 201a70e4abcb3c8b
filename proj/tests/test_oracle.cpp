#include <doctest.h>

#include <json.hpp>
#include <random>

#include "refctl/config.hpp"
#include "refctl/oracle.hpp"
#include "refctl/scenario.hpp"

using namespace refctl;
using namespace refctl::oracle;
using doctest::Approx;

namespace {

InnerProblem random_problem(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto u = thermo::default_params(n);
  auto pred = std::make_shared<const opt::PredictionModel>(plant::build_linear_model(u.params, u.topology, 1.4),
                                                           60.0, 61);
  return opt::make_problem(pred, random_measured_state(n, rng), std::vector<double>(n, 5.0), n, 1.0);
}

std::size_t binomial_sum(std::size_t n, std::size_t K) {
  std::size_t total = 0, c = 1;
  for (std::size_t k = 0; k <= K; ++k) {
    total += c;
    c = c * (n - k) / (k + 1);
  }
  return total;
}

}  // namespace

TEST_SUITE("oracle") {
  TEST_CASE("enumeration visits every candidate once") {
    const auto p = random_problem(6, 3);
    for (std::size_t K = 0; K <= 6; ++K) {
      std::size_t count = 0;
      exhaustive_inner(p, K, &count);
      CHECK(count == binomial_sum(6, K));
    }
  }

  TEST_CASE("single case and singleton agreement") {
    const auto one = random_problem(1, 5);
    const auto s = exhaustive_inner(one, 1);
    CHECK(s.value == Approx(std::max(0.0, opt::value(one, plant::BitVector{1}))));
    const auto p = random_problem(8, 7);
    CHECK(exhaustive_inner(p, 1).alpha == opt::solve_inner_greedy(p, 1).alpha);
  }

  TEST_CASE("oracle dominates greedy which meets its bound") {
    for (std::uint64_t seed = 20; seed < 24; ++seed) {
      const auto p = random_problem(8, seed);
      for (std::size_t K = 1; K <= 8; ++K) {
        const double best = exhaustive_inner(p, K).value;
        const double g = opt::solve_inner_greedy(p, K).value;
        CHECK(best >= g - 1e-12);
        CHECK(g >= (1.0 - std::exp(-1.0)) * best - 1e-9);
      }
    }
  }

  TEST_CASE("bilevel oracle") {
    auto p = random_problem(8, 31);
    p.delta = opt::inner_objective(p, plant::BitVector(8, 0));
    CHECK(exhaustive_bilevel(p).opened == 0);
    std::size_t previous = 8;
    for (double d : {0.0, 0.1, 0.5, 1.0, 5.0, 50.0}) {
      p.delta = d;
      const auto s = exhaustive_bilevel(p);
      CHECK(s.opened <= previous);
      previous = s.opened;
      const auto g = opt::solve_bilevel_greedy(p);
      if (!s.infeasible && !g.infeasible) CHECK(g.opened >= s.opened);
    }
  }

  TEST_CASE("guards refuse large instances") {
    const auto big = random_problem(21, 1);
    CHECK_THROWS_AS(exhaustive_inner(big, 1), std::invalid_argument);
    CHECK_THROWS_AS(check_submodularity(7, [](const plant::BitVector&) { return 0.0; }), std::invalid_argument);
  }

  TEST_CASE("submodularity on a default instance and on a modular function") {
    CHECK(check_submodularity(random_problem(5, 9)).passed());
    const std::vector<double> w{1.0, 2.0, 0.5, 3.0};
    const auto modular = check_submodularity(4, [&](const plant::BitVector& b) {
      double v = 0.0;
      for (std::size_t i = 0; i < b.size(); ++i) v += b[i] * w[i];
      return v;
    });
    CHECK(modular.passed());
    CHECK(modular.metrics.at("worst_margin") == Approx(0.0));
    const auto super = check_submodularity(3, [](const plant::BitVector& b) {
      const double c = static_cast<double>(plant::count_on(b));
      return c * c;
    });
    CHECK_FALSE(super.passed());
  }

  TEST_CASE("monotone dynamics and the sign-flip fault") {
    const auto u = thermo::default_params();
    MonotoneOptions o;
    o.trials = 10;
    o.duration_s = 120.0;
    CHECK(check_monotone_dynamics(u.params, u.topology, o).passed());
    o.flip_input_sign = true;
    CHECK_FALSE(check_monotone_dynamics(u.params, u.topology, o).passed());
  }

  TEST_CASE("all-open is strictly colder than all-closed after the first step") {
    const auto u = thermo::default_params();
    const auto m = plant::build_linear_model(u.params, u.topology, 1.4);
    const Eigen::VectorXd x0 = Eigen::VectorXd::Constant(20, 4.0);
    const Eigen::MatrixXd closed = plant::simulate_linear(m, x0, Eigen::VectorXd::Zero(10), 1.0, 11);
    const Eigen::MatrixXd open = plant::simulate_linear(m, x0, Eigen::VectorXd::Ones(10), 1.0, 11);
    CHECK(((closed.col(10) - open.col(10)).array() > 0.0).all());
  }

  TEST_CASE("suboptimality ratio") {
    auto c = default_config();
    c.scenario.duration_s = 600.0;
    const auto a = scenario::run_closed_loop(c, ControllerKind::linear);
    CHECK(suboptimality_ratio(a.trajectory, a.trajectory) == 100.0);
    c.scenario.duration_s = 300.0;
    const auto b = scenario::run_closed_loop(c, ControllerKind::linear);
    CHECK_THROWS_AS(suboptimality_ratio(a.trajectory, b.trajectory), std::invalid_argument);
  }

  TEST_CASE("report JSON") {
    PropertyReport r;
    r.property = "demo";
    r.instances = 2;
    r.add_violation("X={1}", 0.5);
    const auto j = nlohmann::json::parse(to_json(r));
    CHECK(j["passed"] == false);
    CHECK(j["violations"][0]["witness"] == "X={1}");
  }

  TEST_CASE("uniform draws are in range and reproducible") {
    std::mt19937_64 a(5), b(5);
    for (int k = 0; k < 100; ++k) {
      const double x = uniform01(a);
      CHECK(x >= 0.0);
      CHECK(x < 1.0);
      CHECK(x == uniform01(b));
    }
  }
}
