#pragma once

// One-period look-ahead valve selection. The inner problem picks at most K
// valves minimizing the predicted quadratic overshoot J; the outer problem
// looks for the smallest K with J <= delta.

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "refctl/plant.hpp"

namespace refctl::opt {

using plant::BitVector;

/// The linear model together with the prediction grid. Responses to a single
/// open valve do not depend on the measured state and are cached here.
class PredictionModel {
 public:
  PredictionModel(plant::LinearModel model, double horizon_s, std::size_t samples);

  const plant::LinearModel& model() const { return model_; }
  const plant::LinearModel::SparseMatrix& transposed_A() const { return at_; }
  std::size_t num_cases() const { return model_.num_cases; }
  std::size_t samples() const { return samples_; }
  double horizon_s() const { return horizon_s_; }
  double step_s() const { return horizon_s_ / static_cast<double>(samples_ - 1); }

  /// Air-temperature samples (n x N_T) of the model driven only by B e_i from
  /// a zero state. Computed on first use.
  const std::vector<Eigen::MatrixXd>& unit_air_responses() const;

  /// Air-temperature samples from x0 under a relaxed input.
  Eigen::MatrixXd predict_air(const Eigen::VectorXd& x0, const Eigen::VectorXd& u) const;

 private:
  plant::LinearModel model_;
  plant::LinearModel::SparseMatrix at_;
  double horizon_s_;
  std::size_t samples_;
  mutable std::vector<Eigen::MatrixXd> units_;
};

struct InnerProblem {
  std::shared_ptr<const PredictionModel> prediction;
  Eigen::VectorXd x0;        // (T_food, T_air) at the start of the period
  Eigen::VectorXd temp_max;  // per case [°C]
  std::size_t budget = 0;    // K; the ceiling for the bilevel solvers
  double delta = 1.0;        // [°C^2 s]

  std::size_t num_cases() const { return prediction->num_cases(); }
  void validate() const;
};

InnerProblem make_problem(std::shared_ptr<const PredictionModel> prediction, const plant::PlantState& measured,
                          const std::vector<double>& temp_max, std::size_t budget, double delta);

/// Trapezoidal sum over samples of sum_i (T_air,i - T_max,i)_+^2. Columns of
/// `air` are samples spaced `h` apart.
double quadratic_deviation(const Eigen::MatrixXd& air, const Eigen::VectorXd& temp_max, double h);

double inner_objective(const InnerProblem& problem, const Eigen::VectorXd& alpha);
double inner_objective(const InnerProblem& problem, const BitVector& alpha);
/// J(0) - J(alpha).
double value(const InnerProblem& problem, const Eigen::VectorXd& alpha);
double value(const InnerProblem& problem, const BitVector& alpha);

/// [DV(0)]_i, the first-order benefit of opening valve i.
using MarginalGains = Eigen::VectorXd;

/// Exact gradient of the discretized objective: one forward pass and one
/// backward pass of the RK4 adjoint recursion.
MarginalGains marginal_gains_adjoint(const InnerProblem& problem);

enum class Difference { forward, central };
MarginalGains marginal_gains_fd(const InnerProblem& problem, double eps = 1e-4,
                                Difference scheme = Difference::forward);

struct ValveSolution {
  BitVector alpha;
  double objective = 0.0;          // J(alpha)
  double nominal_objective = 0.0;  // J(0)
  double value = 0.0;              // J(0) - J(alpha)
  std::size_t opened = 0;
  std::optional<double> rho;       // linear variants only
  bool infeasible = false;         // bilevel: J > delta after every admissible valve

  std::size_t budget() const { return opened; }
};

/// Descending-gain prefix, ties to the lowest index, at most K valves.
ValveSolution solve_inner_linear(const InnerProblem& problem, std::size_t K);
/// Greedy on V, ties to the lowest index, stops without strict improvement.
ValveSolution solve_inner_greedy(const InnerProblem& problem, std::size_t K);

/// Outer search with the problem budget as a hard ceiling on the count.
ValveSolution solve_bilevel_linear(const InnerProblem& problem);
ValveSolution solve_bilevel_greedy(const InnerProblem& problem);

/// Compressor count balancing suction inflow and outflow; rounds down below
/// the pressure reference and up at or above it.
BitVector conservative_compressor_action(double suction_pressure_bar, std::size_t valves_open,
                                         const thermo::PlantParams& p);

enum class Variant { linear, greedy };

using BilevelSolver = std::function<ValveSolution(const InnerProblem&)>;
BilevelSolver solver_for(Variant variant);

struct StepDiagnostics {
  double time_s = 0.0;
  std::size_t opened = 0;
  double objective = 0.0;
  double value = 0.0;
  std::optional<double> rho;
  bool infeasible = false;
};

/// Receding-horizon controller. The linear model is built once with the
/// evaporation temperature frozen at the pressure reference.
class OptimizingController {
 public:
  OptimizingController(const thermo::PlantParams& p, const thermo::Topology& topo, double delta,
                       std::size_t prediction_samples, BilevelSolver solver);

  /// `valve_cap` limits the number of open valves (n when absent).
  plant::ControlInput decide(const plant::PlantState& measured, std::optional<std::size_t> valve_cap = std::nullopt,
                             double time_s = 0.0);

  const std::vector<StepDiagnostics>& diagnostics() const { return diagnostics_; }
  const PredictionModel& prediction() const { return *prediction_; }

 private:
  thermo::PlantParams params_;
  double delta_;
  BilevelSolver solver_;
  std::shared_ptr<const PredictionModel> prediction_;
  std::vector<StepDiagnostics> diagnostics_;
};

plant::ControlInput control_step(const plant::PlantState& measured, const thermo::PlantParams& p,
                                 const thermo::Topology& topo, double delta, Variant variant,
                                 std::size_t prediction_samples = 61);

/// CSV with header `time_s,K,J,V,rho`; rho is empty when undefined.
void write_diagnostics_csv(std::ostream& os, const std::vector<StepDiagnostics>& rows);

}  // namespace refctl::opt
