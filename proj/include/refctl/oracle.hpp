#pragma once

// Ground truth by enumeration and executable checks of the structural
// properties the heuristics rely on. Intended for small n only.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "refctl/optctl.hpp"
#include "refctl/plant.hpp"

namespace refctl::oracle {

using opt::InnerProblem;
using opt::ValveSolution;
using plant::BitVector;

inline constexpr std::size_t kMaxEnumerationCases = 20;
inline constexpr std::size_t kMaxTripleCases = 6;

struct Violation {
  std::string witness;
  double margin = 0.0;  // amount by which the inequality failed
};

struct PropertyReport {
  std::string property;
  std::size_t instances = 0;
  std::vector<Violation> violations;
  std::uint64_t seed = 0;
  std::map<std::string, double> metrics;

  bool passed() const { return violations.empty(); }
  void add_violation(std::string witness, double margin);
};

std::string to_json(const PropertyReport& report);
std::string to_json(const std::vector<PropertyReport>& reports);

/// Best value over |alpha| <= K; ties go to the fewest valves, then to the
/// lexicographically smallest index set. `evaluations` counts candidates.
ValveSolution exhaustive_inner(const InnerProblem& problem, std::size_t K, std::size_t* evaluations = nullptr);

/// Smallest K whose exhaustive optimum meets J <= delta, capped at the
/// problem budget; flagged infeasible when no such K exists.
ValveSolution exhaustive_bilevel(const InnerProblem& problem, std::size_t* evaluations = nullptr);

using SetFunction = std::function<double(const BitVector&)>;

/// Diminishing returns over every (X, Y, a) with X in Y and a outside Y, and
/// monotonicity over every X in Y, both with tolerance `tol`.
PropertyReport check_submodularity(std::size_t n, const SetFunction& value, double tol = 1e-9);
PropertyReport check_submodularity(const InnerProblem& problem, double tol = 1e-9);

struct MonotoneOptions {
  std::size_t trials = 100;
  std::uint64_t seed = 2013;
  double duration_s = 600.0;
  double tol = 1e-9;
  bool flip_input_sign = false;  // fault injection: negates the valve input gain
};

/// Paired simulations of the linear model and of the plant temperature
/// subsystem (evaporation temperature frozen) under alpha <= beta; the run
/// with more open valves must never be warmer.
PropertyReport check_monotone_dynamics(const thermo::PlantParams& p, const thermo::Topology& topo,
                                       const MonotoneOptions& options);

/// Oracle average power over controller average power, in percent.
double suboptimality_ratio(const plant::Trajectory& controller, const plant::Trajectory& oracle);

/// Random measured state with a mix of cases above and below T_max.
plant::PlantState random_measured_state(std::size_t n, std::mt19937_64& rng);

/// Uniform draw in [0, 1) that is identical across standard libraries.
double uniform01(std::mt19937_64& rng);

struct SuiteOptions {
  std::uint64_t seed = 2013;
  std::size_t submodular_cases = 5;
  std::size_t submodular_states = 20;
  std::size_t bound_cases = 8;
  std::size_t bound_instances = 50;
  std::size_t gradient_instances = 20;
  double gradient_tol = 1e-4;
  MonotoneOptions monotone;
};

PropertyReport submodularity_suite(const SuiteOptions& o);
PropertyReport linear_bound_suite(const SuiteOptions& o);
PropertyReport greedy_guarantee_suite(const SuiteOptions& o);
PropertyReport gradient_suite(const SuiteOptions& o);
PropertyReport bilevel_oracle_suite(const SuiteOptions& o);
PropertyReport monotone_suite(const SuiteOptions& o);

enum class Suite { theorems, gradient, oracle, monotone, all };
std::vector<PropertyReport> run_suite(Suite suite, const SuiteOptions& o);

}  // namespace refctl::oracle
