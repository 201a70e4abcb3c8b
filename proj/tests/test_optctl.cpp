#include <doctest.h>

#include <random>
#include <sstream>

#include "refctl/optctl.hpp"
#include "refctl/oracle.hpp"

using namespace refctl;
using namespace refctl::opt;
using doctest::Approx;

namespace {

std::shared_ptr<const PredictionModel> prediction(std::size_t n, thermo::Topology* topo_out = nullptr) {
  const auto u = thermo::default_params(n);
  if (topo_out) *topo_out = u.topology;
  return std::make_shared<const PredictionModel>(plant::build_linear_model(u.params, u.topology, 1.4), 60.0, 61);
}

InnerProblem problem_at(std::size_t n, const std::vector<double>& air, double food = 5.0, double delta = 1.0) {
  auto s = plant::PlantState::uniform(n, food, 1.4);
  for (std::size_t i = 0; i < n; ++i) s.air_temp(static_cast<Eigen::Index>(i)) = air[i % air.size()];
  return make_problem(prediction(n), s, std::vector<double>(n, 5.0), n, delta);
}

}  // namespace

TEST_SUITE("optctl") {
  TEST_CASE("objective is zero below the bound") {
    // Closed valves warm the air by roughly 0.14 K/s, so start well below.
    const auto p = problem_at(4, {-5.0}, -5.0);
    CHECK(inner_objective(p, BitVector(4, 0)) == 0.0);
    CHECK(inner_objective(problem_at(4, {2.0}, 2.0), BitVector(4, 1)) == 0.0);
    CHECK(marginal_gains_adjoint(p).isZero());
    CHECK(marginal_gains_fd(p).isZero());
  }

  TEST_CASE("forced constant overshoot integrates analytically") {
    const std::size_t n = 3;
    const Eigen::MatrixXd air = Eigen::MatrixXd::Constant(n, 61, 6.0);
    CHECK(quadratic_deviation(air, Eigen::VectorXd::Constant(n, 5.0), 1.0) == Approx(60.0 * n));
  }

  TEST_CASE("value normalization, monotonicity and symmetry") {
    const auto p = problem_at(4, {6.5, 5.5});
    CHECK(value(p, BitVector(4, 0)) == 0.0);
    CHECK(value(p, BitVector(4, 1)) >= 0.0);
    CHECK(inner_objective(p, BitVector{1, 1, 0, 0}) <= inner_objective(p, BitVector{1, 0, 0, 0}));

    auto two = problem_at(2, {6.0});
    CHECK(value(two, BitVector{1, 0}) == Approx(value(two, BitVector{0, 1})));
  }

  TEST_CASE("adjoint gains match finite differences and are nonnegative") {
    std::mt19937_64 rng(11);
    for (int k = 0; k < 5; ++k) {
      const std::size_t n = 3 + k;
      const auto s = oracle::random_measured_state(n, rng);
      const auto p = make_problem(prediction(n), s, std::vector<double>(n, 5.0), n, 1.0);
      const auto adj = marginal_gains_adjoint(p);
      const auto fd = marginal_gains_fd(p, 1e-4, Difference::central);
      CHECK((adj - fd).norm() <= 1e-4 * std::max(fd.norm(), 1e-12));
      CHECK(adj.minCoeff() >= 0.0);
    }
  }

  TEST_CASE("forward differences are first-order consistent") {
    const auto p = problem_at(4, {6.5, 5.2, 4.0, 7.0});
    const auto adj = marginal_gains_adjoint(p);
    const double e1 = (marginal_gains_fd(p, 1e-3) - adj).cwiseAbs().maxCoeff();
    const double e2 = (marginal_gains_fd(p, 5e-4) - adj).cwiseAbs().maxCoeff();
    CHECK(e2 < e1);
    CHECK(e2 == Approx(e1 / 2.0).epsilon(0.1));
  }

  TEST_CASE("inner linear") {
    const auto p = problem_at(5, {6.5, 5.5, 7.0, 4.0, 6.0});
    const auto zero = solve_inner_linear(p, 0);
    CHECK(zero.opened == 0);
    CHECK(zero.value == 0.0);
    for (std::size_t K = 1; K <= 5; ++K) {
      const auto s = solve_inner_linear(p, K);
      CHECK(s.opened <= K);
      CHECK(s.value == Approx(s.nominal_objective - s.objective));
      REQUIRE(s.rho.has_value());
      CHECK(*s.rho > 0.0);
      CHECK(*s.rho <= 1.0 + 1e-12);
    }
    Eigen::Index top = 0;
    marginal_gains_adjoint(p).maxCoeff(&top);
    BitVector expected(5, 0);
    expected[static_cast<std::size_t>(top)] = 1;
    CHECK(solve_inner_linear(p, 1).alpha == expected);
    const auto cold = problem_at(3, {-5.0}, -5.0);
    const auto none = solve_inner_linear(cold, 3);
    CHECK(none.opened == 0);
    CHECK_FALSE(none.rho.has_value());
  }

  TEST_CASE("inner greedy") {
    const auto p = problem_at(5, {6.5, 5.5, 7.0, 4.0, 6.0});
    const auto one = solve_inner_greedy(p, 1);
    const auto exact = oracle::exhaustive_inner(p, 1);
    CHECK(one.alpha == exact.alpha);
    CHECK(one.value == Approx(exact.value));
    const auto hot = problem_at(4, {7.0}, 6.0);
    CHECK(solve_inner_greedy(hot, 4).value == Approx(value(hot, BitVector(4, 1))));
  }

  TEST_CASE("bilevel solvers") {
    auto p = problem_at(6, {6.5, 5.5, 7.0, 4.0, 6.0, 5.8});
    const double j0 = inner_objective(p, BitVector(6, 0));
    p.delta = j0;
    CHECK(solve_bilevel_linear(p).opened == 0);
    CHECK(solve_bilevel_greedy(p).opened == 0);

    p.delta = 0.5;
    const auto wide = solve_bilevel_linear(p);
    p.delta = 0.05;
    const auto tight = solve_bilevel_linear(p);
    CHECK(tight.opened >= wide.opened);
    for (std::size_t i = 0; i < 6; ++i)
      if (wide.alpha[i]) CHECK(tight.alpha[i] == 1);
    for (const auto* s : {&wide, &tight}) CHECK((s->infeasible || s->objective <= 0.5));

    p.delta = 0.0;
    const auto zero = solve_bilevel_greedy(p);
    CHECK((zero.infeasible || zero.objective == 0.0));

    p.budget = 2;
    const auto capped = solve_bilevel_greedy(p);
    CHECK(capped.opened <= 2);
    CHECK(capped.infeasible);
  }

  TEST_CASE("greedy iterations strictly decrease J") {
    auto p = problem_at(6, {6.5, 5.5, 7.0, 4.0, 6.0, 5.8});
    p.delta = 0.0;
    double previous = inner_objective(p, BitVector(6, 0));
    for (std::size_t K = 1; K <= 6; ++K) {
      const auto s = solve_inner_greedy(p, K);
      if (s.opened < K) break;
      CHECK(s.objective < previous);
      previous = s.objective;
    }
  }

  TEST_CASE("conservative compressor rule") {
    const auto params = thermo::default_params().params;
    CHECK(plant::count_on(conservative_compressor_action(1.3, 0, params)) == 0);
    CHECK(plant::count_on(conservative_compressor_action(1.4 - 1e-9, 6, params)) == 0);
    CHECK(plant::count_on(conservative_compressor_action(1.4, 6, params)) == 1);
    CHECK(plant::count_on(conservative_compressor_action(1.45, 10, params)) == 2);
    CHECK(plant::count_on(conservative_compressor_action(2.0, 10, params)) == 2);
    auto tiny = params;
    tiny.num_compressors = 1;
    CHECK(plant::count_on(conservative_compressor_action(1.45, 10, tiny)) == 1);
  }

  TEST_CASE("control step") {
    const auto u = thermo::default_params();
    const auto cold = plant::PlantState::uniform(10, -5.0, 1.4);
    const auto in = control_step(cold, u.params, u.topology, 1.0, Variant::linear);
    CHECK(plant::count_on(in.valves) == 0);
    CHECK(plant::count_on(in.compressors) == 0);
    auto warm = plant::PlantState::uniform(10, 5.5, 1.45);
    warm.air_temp(3) = 7.0;
    for (auto v : {Variant::linear, Variant::greedy}) {
      const auto a = control_step(warm, u.params, u.topology, 1.0, v);
      const auto b = control_step(warm, u.params, u.topology, 1.0, v);
      CHECK(a == b);
      CHECK(plant::count_on(a.valves) > 0);
    }
  }

  TEST_CASE("diagnostics CSV") {
    std::ostringstream os;
    write_diagnostics_csv(os, {{60.0, 2, 0.5, 3.25, 0.75, false}, {120.0, 0, 0.0, 0.0, std::nullopt, false}});
    CHECK(os.str() == "time_s,K,J,V,rho\n60,2,0.5,3.25,0.75\n120,0,0,0,\n");
  }
}
