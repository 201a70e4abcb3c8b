#include "refctl/optctl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

#include "refctl/config.hpp"

namespace refctl::opt {

PredictionModel::PredictionModel(plant::LinearModel model, double horizon_s, std::size_t samples)
    : model_(std::move(model)), horizon_s_(horizon_s), samples_(samples) {
  if (samples_ < 2) throw std::invalid_argument("prediction needs at least 2 samples");
  if (!(horizon_s_ > 0.0)) throw std::invalid_argument("prediction horizon must be positive");
  at_ = model_.A.transpose();
}

const std::vector<Eigen::MatrixXd>& PredictionModel::unit_air_responses() const {
  if (units_.empty()) {
    const auto n = static_cast<Eigen::Index>(num_cases());
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(2 * n);
    units_.reserve(num_cases());
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::VectorXd forcing = model_.B.col(i);
      units_.push_back(plant::simulate_affine(model_, zero, forcing, step_s(), samples_).bottomRows(n));
    }
  }
  return units_;
}

Eigen::MatrixXd PredictionModel::predict_air(const Eigen::VectorXd& x0, const Eigen::VectorXd& u) const {
  const auto n = static_cast<Eigen::Index>(num_cases());
  return plant::simulate_linear(model_, x0, u, step_s(), samples_).bottomRows(n);
}

void InnerProblem::validate() const {
  if (!prediction) throw std::invalid_argument("inner problem has no prediction model");
  const auto n = static_cast<Eigen::Index>(num_cases());
  if (x0.size() != 2 * n) throw std::invalid_argument("measured state must have length 2n");
  if (temp_max.size() != n) throw std::invalid_argument("temp_max must have length n");
  if (budget > num_cases()) throw std::invalid_argument("valve budget exceeds the number of cases");
  if (!(delta >= 0.0)) throw std::invalid_argument("delta must be nonnegative");
}

InnerProblem make_problem(std::shared_ptr<const PredictionModel> prediction, const plant::PlantState& measured,
                          const std::vector<double>& temp_max, std::size_t budget, double delta) {
  InnerProblem p;
  p.x0 = plant::stack_state(measured);
  p.temp_max = Eigen::Map<const Eigen::VectorXd>(temp_max.data(), static_cast<Eigen::Index>(temp_max.size()));
  p.prediction = std::move(prediction);
  p.budget = budget;
  p.delta = delta;
  p.validate();
  return p;
}

double quadratic_deviation(const Eigen::MatrixXd& air, const Eigen::VectorXd& temp_max, double h) {
  const auto samples = air.cols();
  double total = 0.0;
  for (Eigen::Index k = 0; k < samples; ++k) {
    const double g = (air.col(k) - temp_max).cwiseMax(0.0).squaredNorm();
    total += (k == 0 || k == samples - 1) ? 0.5 * g : g;
  }
  return total * h;
}

namespace {

Eigen::VectorXd relaxed(const BitVector& alpha) { return plant::to_vector(alpha); }

void check_alpha(const InnerProblem& problem, Eigen::Index size) {
  if (size != static_cast<Eigen::Index>(problem.num_cases()))
    throw std::invalid_argument("valve vector must have length n");
}

// Valve order for the linear variants: descending gain, lowest index on ties.
std::vector<std::size_t> gain_order(const MarginalGains& gains) {
  std::vector<std::size_t> order(static_cast<std::size_t>(gains.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return gains(static_cast<Eigen::Index>(a)) > gains(static_cast<Eigen::Index>(b));
  });
  return order;
}

std::optional<double> linear_ratio(const MarginalGains& gains, const ValveSolution& s) {
  double denom = 0.0;
  for (std::size_t i = 0; i < s.alpha.size(); ++i)
    if (s.alpha[i]) denom += gains(static_cast<Eigen::Index>(i));
  if (denom == 0.0) return std::nullopt;
  return s.value / denom;
}

void finish(const InnerProblem& problem, ValveSolution& s, double j0) {
  s.nominal_objective = j0;
  s.objective = inner_objective(problem, s.alpha);
  s.value = j0 - s.objective;
  s.opened = plant::count_on(s.alpha);
}

// Open valves along `order` while the gain is positive, the count is below
// `cap` and, when `stop_at` is given, J still exceeds it.
ValveSolution linear_prefix(const InnerProblem& problem, std::size_t cap, std::optional<double> stop_at) {
  problem.validate();
  const auto gains = marginal_gains_adjoint(problem);
  const double j0 = inner_objective(problem, BitVector(problem.num_cases(), 0));
  ValveSolution s;
  s.alpha.assign(problem.num_cases(), 0);
  double j = j0;
  for (std::size_t idx : gain_order(gains)) {
    if (s.opened >= cap || gains(static_cast<Eigen::Index>(idx)) <= 0.0) break;
    if (stop_at && j <= *stop_at) break;
    s.alpha[idx] = 1;
    ++s.opened;
    if (stop_at) j = inner_objective(problem, s.alpha);
  }
  finish(problem, s, j0);
  s.rho = linear_ratio(gains, s);
  if (stop_at) s.infeasible = s.objective > *stop_at;
  return s;
}

ValveSolution greedy(const InnerProblem& problem, std::size_t cap, std::optional<double> stop_at) {
  problem.validate();
  const auto& pred = *problem.prediction;
  const auto& units = pred.unit_air_responses();
  const double h = pred.step_s();
  const auto n = problem.num_cases();
  Eigen::MatrixXd current = pred.predict_air(problem.x0, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)));
  const double j0 = quadratic_deviation(current, problem.temp_max, h);
  double j = j0;
  ValveSolution s;
  s.alpha.assign(n, 0);
  while (s.opened < cap && !(stop_at && j <= *stop_at)) {
    std::optional<std::size_t> best;
    double best_j = j;
    for (std::size_t a = 0; a < n; ++a) {
      if (s.alpha[a]) continue;
      const double candidate = quadratic_deviation(current + units[a], problem.temp_max, h);
      if (candidate < best_j) {
        best_j = candidate;
        best = a;
      }
    }
    if (!best) break;
    s.alpha[*best] = 1;
    ++s.opened;
    current += units[*best];
    j = best_j;
  }
  finish(problem, s, j0);
  if (stop_at) s.infeasible = s.objective > *stop_at;
  return s;
}

}  // namespace

double inner_objective(const InnerProblem& problem, const Eigen::VectorXd& alpha) {
  check_alpha(problem, alpha.size());
  const auto& pred = *problem.prediction;
  return quadratic_deviation(pred.predict_air(problem.x0, alpha), problem.temp_max, pred.step_s());
}

double inner_objective(const InnerProblem& problem, const BitVector& alpha) {
  return inner_objective(problem, relaxed(alpha));
}

double value(const InnerProblem& problem, const Eigen::VectorXd& alpha) {
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(alpha.size());
  return inner_objective(problem, zero) - inner_objective(problem, alpha);
}

double value(const InnerProblem& problem, const BitVector& alpha) { return value(problem, relaxed(alpha)); }

MarginalGains marginal_gains_adjoint(const InnerProblem& problem) {
  problem.validate();
  const auto& pred = *problem.prediction;
  const auto& m = pred.model();
  const auto n = static_cast<Eigen::Index>(problem.num_cases());
  const auto samples = static_cast<Eigen::Index>(pred.samples());
  const double h = pred.step_s();
  const Eigen::MatrixXd air = pred.predict_air(problem.x0, Eigen::VectorXd::Zero(n));

  // Gradient of the weighted running cost at sample k.
  auto cost_gradient = [&](Eigen::Index k, Eigen::VectorXd& out) {
    const double w = (k == 0 || k == samples - 1) ? 0.5 * h : h;
    out.head(n).setZero();
    out.tail(n) = 2.0 * w * (air.col(k) - problem.temp_max).cwiseMax(0.0);
  };

  // x_{k+1} = P x_k + h Q b with P = I + M + M^2/2 + M^3/6 + M^4/24,
  // Q = I + M/2 + M^2/6 + M^3/24, M = h A. mu holds dJ/dx_{k+1}.
  const auto& at = pred.transposed_A();
  Eigen::VectorXd mu(2 * n), grad(2 * n), y1(2 * n), y2(2 * n), y3(2 * n), y4(2 * n);
  Eigen::VectorXd forcing_adjoint = Eigen::VectorXd::Zero(2 * n);
  cost_gradient(samples - 1, mu);
  for (Eigen::Index k = samples - 2; k >= 0; --k) {
    y1.noalias() = h * (at * mu);
    y2.noalias() = h * (at * y1);
    y3.noalias() = h * (at * y2);
    y4.noalias() = h * (at * y3);
    forcing_adjoint += h * (mu + y1 / 2.0 + y2 / 6.0 + y3 / 24.0);
    cost_gradient(k, grad);
    mu += grad + y1 + y2 / 2.0 + y3 / 6.0 + y4 / 24.0;
  }
  return -(m.B.transpose() * forcing_adjoint);
}

MarginalGains marginal_gains_fd(const InnerProblem& problem, double eps, Difference scheme) {
  if (!(eps > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  problem.validate();
  const auto n = static_cast<Eigen::Index>(problem.num_cases());
  const double j0 = inner_objective(problem, Eigen::VectorXd::Zero(n));
  MarginalGains g(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
    u(i) = eps;
    const double up = inner_objective(problem, u);
    if (scheme == Difference::forward) {
      g(i) = (j0 - up) / eps;
    } else {
      u(i) = -eps;
      g(i) = (inner_objective(problem, u) - up) / (2.0 * eps);
    }
  }
  return g;
}

ValveSolution solve_inner_linear(const InnerProblem& problem, std::size_t K) {
  if (K > problem.num_cases()) throw std::invalid_argument("K exceeds the number of cases");
  return linear_prefix(problem, K, std::nullopt);
}

ValveSolution solve_inner_greedy(const InnerProblem& problem, std::size_t K) {
  if (K > problem.num_cases()) throw std::invalid_argument("K exceeds the number of cases");
  return greedy(problem, K, std::nullopt);
}

ValveSolution solve_bilevel_linear(const InnerProblem& problem) {
  return linear_prefix(problem, problem.budget, problem.delta);
}

ValveSolution solve_bilevel_greedy(const InnerProblem& problem) {
  return greedy(problem, problem.budget, problem.delta);
}

BitVector conservative_compressor_action(double suction_pressure_bar, std::size_t valves_open,
                                         const thermo::PlantParams& p) {
  const double required = static_cast<double>(valves_open) * p.max_refrigerant_mass_kg /
                          (thermo::suction_density(suction_pressure_bar) * p.compressor_unit_flow() *
                           p.control_period_s);
  const double rounded = suction_pressure_bar < p.suction_pressure_ref_bar ? std::floor(required)
                                                                           : std::ceil(required);
  const auto on = static_cast<std::size_t>(std::clamp(rounded, 0.0, static_cast<double>(p.num_compressors)));
  BitVector out(p.num_compressors, 0);
  std::fill_n(out.begin(), on, 1);
  return out;
}

BilevelSolver solver_for(Variant variant) {
  if (variant == Variant::greedy) return solve_bilevel_greedy;
  return solve_bilevel_linear;
}

OptimizingController::OptimizingController(const thermo::PlantParams& p, const thermo::Topology& topo,
                                           double delta, std::size_t prediction_samples, BilevelSolver solver)
    : params_(p), delta_(delta), solver_(std::move(solver)) {
  prediction_ = std::make_shared<const PredictionModel>(
      plant::build_linear_model(p, topo, p.suction_pressure_ref_bar), p.control_period_s, prediction_samples);
}

plant::ControlInput OptimizingController::decide(const plant::PlantState& measured,
                                                 std::optional<std::size_t> valve_cap, double time_s) {
  const std::size_t cap = std::min(valve_cap.value_or(params_.num_cases), params_.num_cases);
  const auto problem = make_problem(prediction_, measured, params_.temp_max_c, cap, delta_);
  const auto solution = solver_(problem);
  diagnostics_.push_back({time_s, solution.opened, solution.objective, solution.value, solution.rho,
                          solution.infeasible});
  return {solution.alpha,
          conservative_compressor_action(measured.suction_pressure, solution.opened, params_)};
}

plant::ControlInput control_step(const plant::PlantState& measured, const thermo::PlantParams& p,
                                 const thermo::Topology& topo, double delta, Variant variant,
                                 std::size_t prediction_samples) {
  OptimizingController controller(p, topo, delta, prediction_samples, solver_for(variant));
  return controller.decide(measured);
}

void write_diagnostics_csv(std::ostream& os, const std::vector<StepDiagnostics>& rows) {
  os << "time_s,K,J,V,rho\n";
  for (const auto& r : rows) {
    os << format_double(r.time_s) << ',' << r.opened << ',' << format_double(r.objective) << ','
       << format_double(r.value) << ',' << (r.rho ? format_double(*r.rho) : std::string()) << '\n';
  }
}

}  // namespace refctl::opt
