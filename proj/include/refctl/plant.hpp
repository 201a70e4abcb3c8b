#pragma once

// Switched, interconnected display-case dynamics coupled to the suction
// manifold, plus the affine prediction model used by the optimizing
// controller.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "refctl/thermo.hpp"

namespace refctl::plant {

using thermo::PlantParams;
using thermo::Topology;

/// Binary actuator vector; entries are 0 or 1.
using BitVector = std::vector<std::uint8_t>;

std::size_t count_on(const BitVector& bits);
Eigen::VectorXd to_vector(const BitVector& bits);

struct PlantState {
  Eigen::VectorXd food_temp;  // [°C]
  Eigen::VectorXd air_temp;   // [°C]
  double suction_pressure = 1.4;  // [bar]

  std::size_t num_cases() const { return static_cast<std::size_t>(air_temp.size()); }
  static PlantState uniform(std::size_t n, double temp_c, double pressure_bar);
};

struct ControlInput {
  BitVector valves;       // length n
  BitVector compressors;  // length n_c

  static ControlInput closed(std::size_t n, std::size_t nc);
  bool operator==(const ControlInput&) const = default;
};

// Right-hand sides. `i` is a zero-based case index.
double food_temp_derivative(const PlantState& s, const PlantParams& p, std::size_t i);
double air_temp_derivative(const PlantState& s, const BitVector& valves, const PlantParams& p,
                           const Topology& topo, double evap_temp_c, std::size_t i);
double valve_mass_flow(std::uint8_t valve, const PlantParams& p);          // [kg/s]
double compressor_volume_flow(std::uint8_t compressor, const PlantParams& p);  // [m^3/s]
double suction_pressure_derivative(const PlantState& s, const BitVector& valves,
                                   const BitVector& compressors, const PlantParams& p);  // [bar/s]
double total_power(const PlantState& s, const BitVector& compressors, const PlantParams& p);  // [W]

/// One fixed-step RK4 step with the input held constant. Throws
/// IntegrationError naming the variable that left its valid range.
PlantState step(const PlantState& s, const ControlInput& input, double h, const PlantParams& p,
                const Topology& topo, double time_s = 0.0);

/// RK4 step of the temperature subsystem only, with the evaporation
/// temperature held fixed and the suction pressure left unchanged.
PlantState step_thermal(const PlantState& s, const Eigen::VectorXd& valves, double evap_temp_c,
                        double h, const PlantParams& p, const Topology& topo);

struct Trajectory {
  std::vector<double> time_s;
  std::vector<PlantState> states;
  std::vector<ControlInput> controls;  // controls[k] acts on [time_s[k], time_s[k+1])
  std::vector<double> power_w;         // power at the start of interval k

  std::size_t num_intervals() const { return controls.size(); }
  void check_invariants() const;
};

/// Inputs held for `period_s` each, in order.
struct ControlSchedule {
  double period_s = 60.0;
  std::vector<ControlInput> inputs;

  const ControlInput& at(double t) const;
};

/// Integrates the plant over `horizon_s` with step `h`, recording every step.
Trajectory simulate(const PlantState& initial, const ControlSchedule& schedule, double horizon_s,
                    const PlantParams& p, const Topology& topo, double h = 1.0);

/// CSV with header time_s,Tfood_1..,Tair_1..,Psuc_bar,u_1..,uc_1..,power_W.
/// Row k carries sample k and the input applied from it; the final sample has
/// empty input and power fields. Without `dense`, only samples on multiples
/// of `period_s` (and the final sample) are written.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj, bool dense = true, double period_s = 60.0);
Trajectory read_trajectory_csv(std::istream& is);

/// x' = A x + B u + C over x = (T_food, T_air), with the evaporation
/// temperature frozen at a reference suction pressure.
struct LinearModel {
  using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  std::size_t num_cases = 0;
  SparseMatrix A;  // 2n x 2n
  SparseMatrix B;  // 2n x n
  Eigen::VectorXd C;
  double frozen_evap_temp_c = 0.0;

  Eigen::MatrixXd dense_A() const { return Eigen::MatrixXd(A); }
  Eigen::MatrixXd dense_B() const { return Eigen::MatrixXd(B); }
};

LinearModel build_linear_model(const PlantParams& p, const Topology& topo, double freeze_pressure_bar);

Eigen::VectorXd stack_state(const PlantState& s);

/// RK4 samples of the linear model under a constant (possibly relaxed) input.
/// Column k holds x(t0 + k h); `samples` columns in total.
Eigen::MatrixXd simulate_linear(const LinearModel& m, const Eigen::VectorXd& x0,
                                const Eigen::VectorXd& u, double h, std::size_t samples);

/// Same recursion driven by an arbitrary constant forcing b in place of B u + C.
Eigen::MatrixXd simulate_affine(const LinearModel& m, const Eigen::VectorXd& x0,
                                const Eigen::VectorXd& forcing, double h, std::size_t samples);

}  // namespace refctl::plant
