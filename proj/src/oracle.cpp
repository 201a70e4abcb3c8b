#include "refctl/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace refctl::oracle {

void PropertyReport::add_violation(std::string witness, double margin) {
  violations.push_back({std::move(witness), margin});
}

namespace {

nlohmann::json report_json(const PropertyReport& r) {
  nlohmann::json j;
  j["property"] = r.property;
  j["passed"] = r.passed();
  j["instances"] = r.instances;
  j["seed"] = r.seed;
  j["metrics"] = r.metrics;
  auto& v = j["violations"] = nlohmann::json::array();
  for (const auto& x : r.violations) v.push_back({{"witness", x.witness}, {"margin", x.margin}});
  return j;
}

std::string describe(const BitVector& bits) {
  std::string s = "{";
  bool first = true;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (!bits[i]) continue;
    s += (first ? "" : ",") + std::to_string(i + 1);
    first = false;
  }
  return s + "}";
}

BitVector from_mask(std::uint64_t mask, std::size_t n) {
  BitVector b(n, 0);
  for (std::size_t i = 0; i < n; ++i) b[i] = (mask >> i) & 1u;
  return b;
}

// Calls visit(bits) for every subset of size k in lexicographic index order.
template <typename F>
void for_each_combination(std::size_t n, std::size_t k, F&& visit) {
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  BitVector bits(n, 0);
  while (true) {
    std::fill(bits.begin(), bits.end(), 0);
    for (auto i : idx) bits[i] = 1;
    visit(bits);
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + i - 1) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

void guard(std::size_t n, std::size_t limit, const char* what) {
  if (n > limit)
    throw std::invalid_argument(std::string(what) + " refuses n = " + std::to_string(n) + " (limit " +
                                std::to_string(limit) + ")");
}

// Best candidate of exactly size k; updates `best` on strict improvement.
void search_size(const InnerProblem& problem, std::size_t k, double j0, ValveSolution& best, bool& have,
                 std::size_t* evaluations) {
  for_each_combination(problem.num_cases(), k, [&](const BitVector& bits) {
    const double j = opt::inner_objective(problem, bits);
    if (evaluations) ++*evaluations;
    if (!have || j0 - j > best.value) {
      best.alpha = bits;
      best.objective = j;
      best.value = j0 - j;
      best.opened = k;
      have = true;
    }
  });
}

std::shared_ptr<const opt::PredictionModel> random_prediction(std::size_t n, std::mt19937_64& rng) {
  auto unit = thermo::default_params(n);
  for (auto& m : unit.params.food_mass_kg) m *= 0.8 + 0.4 * uniform01(rng);
  const auto& p = unit.params;
  return std::make_shared<const opt::PredictionModel>(
      plant::build_linear_model(p, unit.topology, p.suction_pressure_ref_bar), p.control_period_s, 61);
}

InnerProblem random_instance(std::size_t n, std::mt19937_64& rng, double delta = 1.0) {
  auto prediction = random_prediction(n, rng);
  const auto state = random_measured_state(n, rng);
  return opt::make_problem(prediction, state, std::vector<double>(n, 5.0), n, delta);
}

}  // namespace

std::string to_json(const PropertyReport& report) { return report_json(report).dump(2); }

std::string to_json(const std::vector<PropertyReport>& reports) {
  auto arr = nlohmann::json::array();
  for (const auto& r : reports) arr.push_back(report_json(r));
  return arr.dump(2);
}

ValveSolution exhaustive_inner(const InnerProblem& problem, std::size_t K, std::size_t* evaluations) {
  problem.validate();
  guard(problem.num_cases(), kMaxEnumerationCases, "exhaustive_inner");
  if (K > problem.num_cases()) throw std::invalid_argument("K exceeds the number of cases");
  const double j0 = opt::inner_objective(problem, BitVector(problem.num_cases(), 0));
  ValveSolution best;
  bool have = false;
  for (std::size_t k = 0; k <= K; ++k) search_size(problem, k, j0, best, have, evaluations);
  best.nominal_objective = j0;
  return best;
}

ValveSolution exhaustive_bilevel(const InnerProblem& problem, std::size_t* evaluations) {
  problem.validate();
  guard(problem.num_cases(), kMaxEnumerationCases, "exhaustive_bilevel");
  const double j0 = opt::inner_objective(problem, BitVector(problem.num_cases(), 0));
  ValveSolution best;
  bool have = false;
  for (std::size_t k = 0; k <= problem.budget; ++k) {
    search_size(problem, k, j0, best, have, evaluations);
    if (best.objective <= problem.delta) break;
  }
  best.nominal_objective = j0;
  best.infeasible = best.objective > problem.delta;
  return best;
}

PropertyReport check_submodularity(std::size_t n, const SetFunction& value, double tol) {
  guard(n, kMaxTripleCases, "check_submodularity");
  const std::uint64_t full = (std::uint64_t{1} << n) - 1;
  std::vector<double> v(full + 1);
  for (std::uint64_t m = 0; m <= full; ++m) v[m] = value(from_mask(m, n));
  PropertyReport r;
  r.property = "submodularity";
  double worst = -INFINITY;
  std::size_t triples = 0;
  for (std::uint64_t y = 0; y <= full; ++y) {
    // Enumerates every X that is a subset of Y, including Y itself.
    for (std::uint64_t x = y;; x = (x - 1) & y) {
      if (v[x] > v[y] + tol) {
        r.add_violation("monotone: V(" + describe(from_mask(x, n)) + ") > V(" + describe(from_mask(y, n)) + ")",
                        v[x] - v[y]);
      }
      for (std::size_t a = 0; a < n; ++a) {
        const std::uint64_t bit = std::uint64_t{1} << a;
        if (y & bit) continue;
        ++triples;
        const double lhs = v[x | bit] - v[x];
        const double rhs = v[y | bit] - v[y];
        worst = std::max(worst, rhs - lhs);
        if (lhs < rhs - tol) {
          r.add_violation("X=" + describe(from_mask(x, n)) + " Y=" + describe(from_mask(y, n)) +
                              " a=" + std::to_string(a + 1),
                          rhs - lhs);
        }
      }
      if (x == 0) break;
    }
  }
  r.instances = triples;
  r.metrics["triples"] = static_cast<double>(triples);
  r.metrics["worst_margin"] = triples ? worst : 0.0;
  return r;
}

PropertyReport check_submodularity(const InnerProblem& problem, double tol) {
  return check_submodularity(
      problem.num_cases(), [&](const BitVector& bits) { return opt::value(problem, bits); }, tol);
}

PropertyReport check_monotone_dynamics(const thermo::PlantParams& p, const thermo::Topology& topo,
                                       const MonotoneOptions& o) {
  if (o.trials < 1) throw std::invalid_argument("monotone check needs at least one trial");
  PropertyReport r;
  r.property = "monotone_dynamics";
  r.seed = o.seed;
  std::mt19937_64 rng(o.seed);
  const std::size_t n = p.num_cases;
  auto model = plant::build_linear_model(p, topo, p.suction_pressure_ref_bar);
  if (o.flip_input_sign) model.B *= -1.0;
  const double evap = (o.flip_input_sign ? -1.0 : 1.0) * model.frozen_evap_temp_c;
  const auto steps = static_cast<std::size_t>(std::llround(o.duration_s));
  double worst = -INFINITY;

  auto compare = [&](const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, std::size_t trial, const char* which,
                     std::size_t k) {
    // `lo` has more open valves and must not be warmer.
    const Eigen::VectorXd diff = lo - hi;
    Eigen::Index row = 0;
    const double m = diff.maxCoeff(&row);
    worst = std::max(worst, m);
    if (m > o.tol) {
      std::ostringstream w;
      w << "trial " << trial << ", " << which << ", state " << row + 1 << " at t=" << k << " s";
      r.add_violation(w.str(), m);
      return false;
    }
    return true;
  };

  for (std::size_t t = 0; t < o.trials; ++t) {
    BitVector beta(n), alpha(n);
    for (std::size_t i = 0; i < n; ++i) {
      beta[i] = uniform01(rng) < 0.5;
      alpha[i] = beta[i] && uniform01(rng) < 0.5;
    }
    const auto x0 = random_measured_state(n, rng);
    const Eigen::VectorXd a = plant::to_vector(alpha), b = plant::to_vector(beta);

    const Eigen::MatrixXd xa = plant::simulate_linear(model, plant::stack_state(x0), a, 1.0, steps + 1);
    const Eigen::MatrixXd xb = plant::simulate_linear(model, plant::stack_state(x0), b, 1.0, steps + 1);
    for (std::size_t k = 0; k <= steps; ++k)
      if (!compare(xb.col(static_cast<Eigen::Index>(k)), xa.col(static_cast<Eigen::Index>(k)), t + 1,
                   "linear model", k))
        break;

    auto sa = x0, sb = x0;
    for (std::size_t k = 1; k <= steps; ++k) {
      sa = plant::step_thermal(sa, a, evap, 1.0, p, topo);
      sb = plant::step_thermal(sb, b, evap, 1.0, p, topo);
      if (!compare(plant::stack_state(sb), plant::stack_state(sa), t + 1, "plant thermal", k)) break;
    }
    r.instances += 1;
  }
  r.metrics["worst_margin"] = worst;
  r.metrics["samples_per_trial"] = static_cast<double>(steps + 1);
  return r;
}

double suboptimality_ratio(const plant::Trajectory& controller, const plant::Trajectory& oracle) {
  auto horizon = [](const plant::Trajectory& t) { return t.time_s.empty() ? 0.0 : t.time_s.back(); };
  auto average = [&](const plant::Trajectory& t) {
    double e = 0.0;
    for (std::size_t k = 0; k < t.power_w.size(); ++k) e += t.power_w[k] * (t.time_s[k + 1] - t.time_s[k]);
    return e / horizon(t);
  };
  if (std::abs(horizon(controller) - horizon(oracle)) > 1e-9 || horizon(oracle) <= 0.0)
    throw std::invalid_argument("suboptimality_ratio: traces cover different horizons");
  const double c = average(controller), o = average(oracle);
  if (c == o) return 100.0;
  return 100.0 * o / c;
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

plant::PlantState random_measured_state(std::size_t n, std::mt19937_64& rng) {
  auto s = plant::PlantState::uniform(n, 0.0, 1.4);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    s.food_temp(k) = 2.0 + 4.5 * uniform01(rng);
    s.air_temp(k) = 2.0 + 6.0 * uniform01(rng);
  }
  return s;
}

PropertyReport submodularity_suite(const SuiteOptions& o) {
  PropertyReport r;
  r.property = "submodularity";
  r.seed = o.seed;
  std::mt19937_64 rng(o.seed);
  double worst = -INFINITY;
  for (std::size_t s = 0; s < o.submodular_states; ++s) {
    const auto problem = random_instance(o.submodular_cases, rng);
    auto one = check_submodularity(problem);
    r.instances += one.instances;
    worst = std::max(worst, one.metrics["worst_margin"]);
    for (auto& v : one.violations) r.add_violation("state " + std::to_string(s + 1) + ": " + v.witness, v.margin);
  }
  r.metrics["states"] = static_cast<double>(o.submodular_states);
  r.metrics["worst_margin"] = worst;
  return r;
}

PropertyReport linear_bound_suite(const SuiteOptions& o) {
  PropertyReport r;
  r.property = "linear_bound";
  r.seed = o.seed;
  std::mt19937_64 rng(o.seed + 1);
  double min_rho = INFINITY;
  for (std::size_t s = 0; s < o.bound_instances; ++s) {
    const auto problem = random_instance(o.bound_cases, rng);
    for (std::size_t K = 1; K <= problem.num_cases(); ++K) {
      const auto star = opt::solve_inner_linear(problem, K);
      const auto best = exhaustive_inner(problem, K);
      ++r.instances;
      const std::string where = "instance " + std::to_string(s + 1) + " K=" + std::to_string(K);
      if (!star.rho) {
        if (best.value > 1e-9) r.add_violation(where + ": no positive gain but V(opt)>0", best.value);
        continue;
      }
      min_rho = std::min(min_rho, *star.rho);
      const double gap = *star.rho * best.value - star.value;
      if (gap > 1e-9) r.add_violation(where + " alpha*=" + describe(star.alpha), gap);
    }
  }
  r.metrics["min_rho"] = std::isfinite(min_rho) ? min_rho : 1.0;
  return r;
}

PropertyReport greedy_guarantee_suite(const SuiteOptions& o) {
  PropertyReport r;
  r.property = "greedy_guarantee";
  r.seed = o.seed;
  std::mt19937_64 rng(o.seed + 1);
  const double bound = 1.0 - std::exp(-1.0);
  double min_ratio = 1.0, min_linear = 1.0;
  for (std::size_t s = 0; s < o.bound_instances; ++s) {
    const auto problem = random_instance(o.bound_cases, rng);
    for (std::size_t K = 1; K <= problem.num_cases(); ++K) {
      const auto g = opt::solve_inner_greedy(problem, K);
      const auto l = opt::solve_inner_linear(problem, K);
      const auto best = exhaustive_inner(problem, K);
      ++r.instances;
      if (g.value < bound * best.value - 1e-9)
        r.add_violation("instance " + std::to_string(s + 1) + " K=" + std::to_string(K), bound * best.value - g.value);
      if (best.value > 1e-9) {
        min_ratio = std::min(min_ratio, g.value / best.value);
        min_linear = std::min(min_linear, l.value / best.value);
      }
    }
  }
  r.metrics["min_greedy_ratio"] = min_ratio;
  r.metrics["min_linear_ratio"] = min_linear;
  return r;
}

PropertyReport gradient_suite(const SuiteOptions& o) {
  PropertyReport r;
  r.property = "adjoint_gradient";
  r.seed = o.seed;
  std::mt19937_64 rng(o.seed + 2);
  double worst = 0.0;
  for (std::size_t s = 0; s < o.gradient_instances; ++s) {
    const auto problem = random_instance(4 + s % 7, rng);
    const auto adj = opt::marginal_gains_adjoint(problem);
    const auto fd = opt::marginal_gains_fd(problem, 1e-4, opt::Difference::central);
    const double scale = std::max(fd.norm(), 1e-12);
    const double rel = (adj - fd).norm() / scale;
    ++r.instances;
    worst = std::max(worst, rel);
    if (fd.norm() > 0.0 && rel > o.gradient_tol)
      r.add_violation("instance " + std::to_string(s + 1) + " n=" + std::to_string(problem.num_cases()), rel);
    if ((adj.array() < -1e-12).any())
      r.add_violation("instance " + std::to_string(s + 1) + ": negative gain", -adj.minCoeff());
  }
  r.metrics["max_relative_error"] = worst;
  return r;
}

PropertyReport bilevel_oracle_suite(const SuiteOptions& o) {
  PropertyReport r;
  r.property = "bilevel_oracle";
  r.seed = o.seed;
  std::mt19937_64 rng(o.seed + 3);
  for (std::size_t s = 0; s < o.bound_instances; ++s) {
    auto problem = random_instance(o.bound_cases, rng);
    const auto exact = exhaustive_bilevel(problem);
    const auto greedy = opt::solve_bilevel_greedy(problem);
    const auto linear = opt::solve_bilevel_linear(problem);
    ++r.instances;
    const std::string where = "instance " + std::to_string(s + 1);
    if (!exact.infeasible && !greedy.infeasible && greedy.opened < exact.opened)
      r.add_violation(where + ": greedy K below the exact minimum", static_cast<double>(exact.opened - greedy.opened));
    if (!exact.infeasible && !linear.infeasible && linear.opened < exact.opened)
      r.add_violation(where + ": linear K below the exact minimum", static_cast<double>(exact.opened - linear.opened));
    for (const auto* sol : {&greedy, &linear})
      if (!sol->infeasible && sol->objective > problem.delta)
        r.add_violation(where + ": feasible flag with J above delta", sol->objective - problem.delta);
  }
  return r;
}

PropertyReport monotone_suite(const SuiteOptions& o) {
  const auto unit = thermo::default_params();
  return check_monotone_dynamics(unit.params, unit.topology, o.monotone);
}

std::vector<PropertyReport> run_suite(Suite suite, const SuiteOptions& o) {
  std::vector<PropertyReport> out;
  const bool all = suite == Suite::all;
  if (all || suite == Suite::theorems) {
    out.push_back(submodularity_suite(o));
    out.push_back(linear_bound_suite(o));
    out.push_back(greedy_guarantee_suite(o));
  }
  if (all || suite == Suite::theorems || suite == Suite::monotone) out.push_back(monotone_suite(o));
  if (all || suite == Suite::gradient) out.push_back(gradient_suite(o));
  if (all || suite == Suite::oracle) out.push_back(bilevel_oracle_suite(o));
  return out;
}

}  // namespace refctl::oracle
