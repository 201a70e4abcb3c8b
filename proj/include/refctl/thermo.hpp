#pragma once

// R134a property fits and the refrigeration-unit parameter set.

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace refctl::thermo {

/// Lower and upper suction pressure [bar] over which the property fits are
/// considered valid.
inline constexpr double kOperatingPressureMin = 0.6;
inline constexpr double kOperatingPressureMax = 2.2;

/// Polynomial with coefficients ordered highest degree first.
struct Polynomial {
  std::vector<double> coefficients;

  double operator()(double x) const;
  double derivative(double x) const;
};

/// The five R134a fits, all functions of suction pressure in bar.
struct RefrigerantModel {
  Polynomial evaporation_temperature;  // [°C]
  Polynomial evaporation_enthalpy;     // [J/kg]
  Polynomial suction_density;          // [kg/m^3]
  Polynomial density_gradient;         // [kg/(m^3 bar)]
  Polynomial compressor_specific_power;  // rho_suc (h_oc - h_ic) [J/m^3]

  static const RefrigerantModel& r134a();
};

double evaporation_temperature(double suction_pressure_bar);
double evaporation_enthalpy(double suction_pressure_bar);
double suction_density(double suction_pressure_bar);
double density_pressure_gradient(double suction_pressure_bar);
double compressor_specific_power(double suction_pressure_bar);

/// Symmetric case-to-case air heat transfer coefficients [J/(s K)].
class Topology {
 public:
  Topology() = default;
  explicit Topology(Eigen::MatrixXd coupling);

  static Topology chain(std::size_t n, double k);
  static Topology ring(std::size_t n, double k);
  static Topology isolated(std::size_t n);

  std::size_t size() const { return static_cast<std::size_t>(coupling_.rows()); }
  double operator()(std::size_t i, std::size_t j) const { return coupling_(i, j); }
  const Eigen::MatrixXd& matrix() const { return coupling_; }
  /// Sum of row i, the total conductance from case i to its neighbors.
  double row_sum(std::size_t i) const { return coupling_.row(i).sum(); }

  /// Empty when the matrix is a valid topology.
  std::vector<std::string> violations() const;

 private:
  Eigen::MatrixXd coupling_;
};

/// Physical and control parameters of one multi-case unit. Per-case
/// quantities are vectors of length `num_cases`.
struct PlantParams {
  std::size_t num_cases = 10;
  std::size_t num_compressors = 7;

  std::vector<double> food_mass_kg;
  std::vector<double> food_heat_capacity;  // J/(kg K)
  std::vector<double> air_mass_kg;
  std::vector<double> air_heat_capacity;   // J/(kg K)
  // Stored for completeness; the wall state is not simulated.
  std::vector<double> wall_mass_kg;
  std::vector<double> wall_heat_capacity;

  double k_food_air = 300.0;  // J/(s K)
  double k_air_evap = 225.0;
  double k_amb_air = 275.0;
  double k_case_case = 500.0;  // neighbor coefficient used by the default topology

  double ambient_temp_c = 20.0;
  std::vector<double> temp_min_c;
  std::vector<double> temp_max_c;

  double max_refrigerant_mass_kg = 1.0;
  double suction_volume_m3 = 10.0;
  double volumetric_efficiency = 0.81;
  double compressor_volume_m3_per_s = 0.2;

  double control_period_s = 60.0;
  double pi_kp = 0.1;
  double pi_ki = -0.8;
  double suction_pressure_ref_bar = 1.4;
  double dead_band_bar = 0.3;

  /// Volume flow of one running compressor, eta * V_comp / n [m^3/s].
  double compressor_unit_flow() const;

  /// Every violated invariant, empty when valid.
  std::vector<std::string> violations() const;
  /// Throws ConfigError listing violations.
  void validate() const;
};

struct UnitModel {
  PlantParams params;
  Topology topology;
};

/// Reference parameter set: 10 chained cases, 7 compressors, 60 s period.
UnitModel default_params();

/// Same physical constants resized to `n` cases (chain topology).
UnitModel default_params(std::size_t n);

}  // namespace refctl::thermo
