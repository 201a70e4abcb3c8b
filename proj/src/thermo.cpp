#include "refctl/thermo.hpp"

#include <cmath>
#include <sstream>

#include "refctl/errors.hpp"

namespace refctl {

namespace {
std::string join_violations(const std::vector<std::string>& v) {
  std::ostringstream os;
  os << "invalid configuration:";
  for (const auto& s : v) os << "\n  - " << s;
  return os.str();
}
}  // namespace

ConfigError::ConfigError(std::vector<std::string> violations)
    : std::runtime_error(join_violations(violations)), violations_(std::move(violations)) {}

IntegrationError::IntegrationError(std::string variable, double time_s, const std::string& detail)
    : std::runtime_error("integration failed at t=" + std::to_string(time_s) + " s: " + variable +
                         " " + detail),
      variable_(std::move(variable)),
      time_s_(time_s) {}

}  // namespace refctl

namespace refctl::thermo {

double Polynomial::operator()(double x) const {
  double acc = 0.0;
  for (double c : coefficients) acc = acc * x + c;
  return acc;
}

double Polynomial::derivative(double x) const {
  const auto degree = coefficients.size();
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < degree; ++k)
    acc = acc * x + coefficients[k] * static_cast<double>(degree - 1 - k);
  return acc;
}

const RefrigerantModel& RefrigerantModel::r134a() {
  static const RefrigerantModel model{
      {{-4.3544, 29.2240, -51.2005}},
      {{0.0217e5, -0.1704e5, 2.2988e5}},
      {{4.6073, 0.3798}},
      {{-0.0329, 0.2161, -0.4742, 5.4817}},
      {{0.0265e5, -0.4346e5, 2.4923e5, 1.2189e5}},
  };
  return model;
}

namespace {
void check_pressure(double p) {
  if (!std::isfinite(p) || p <= 0.0)
    throw DomainError("suction pressure must be positive and finite, got " + std::to_string(p));
}
}  // namespace

double evaporation_temperature(double p) {
  check_pressure(p);
  return RefrigerantModel::r134a().evaporation_temperature(p);
}

double evaporation_enthalpy(double p) {
  check_pressure(p);
  return RefrigerantModel::r134a().evaporation_enthalpy(p);
}

double suction_density(double p) {
  check_pressure(p);
  return RefrigerantModel::r134a().suction_density(p);
}

double density_pressure_gradient(double p) {
  check_pressure(p);
  return RefrigerantModel::r134a().density_gradient(p);
}

double compressor_specific_power(double p) {
  check_pressure(p);
  return RefrigerantModel::r134a().compressor_specific_power(p);
}

Topology::Topology(Eigen::MatrixXd coupling) : coupling_(std::move(coupling)) {}

Topology Topology::chain(std::size_t n, double k) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i + 1 < n; ++i) m(i, i + 1) = m(i + 1, i) = k;
  return Topology(std::move(m));
}

Topology Topology::ring(std::size_t n, double k) {
  Topology t = chain(n, k);
  if (n > 2) t.coupling_(0, n - 1) = t.coupling_(n - 1, 0) = k;
  return t;
}

Topology Topology::isolated(std::size_t n) { return Topology(Eigen::MatrixXd::Zero(n, n)); }

std::vector<std::string> Topology::violations() const {
  std::vector<std::string> out;
  if (coupling_.rows() != coupling_.cols()) {
    out.push_back("topology matrix must be square");
    return out;
  }
  const auto n = coupling_.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (coupling_(i, i) != 0.0)
      out.push_back("topology diagonal entry " + std::to_string(i + 1) + " must be zero");
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double a = coupling_(i, j);
      const double b = coupling_(j, i);
      if (!std::isfinite(a) || a < 0.0 || !std::isfinite(b) || b < 0.0)
        out.push_back("topology coefficient (" + std::to_string(i + 1) + "," +
                      std::to_string(j + 1) + ") must be finite and nonnegative");
      else if (a != b)
        out.push_back("topology must be symmetric at (" + std::to_string(i + 1) + "," +
                      std::to_string(j + 1) + ")");
    }
  }
  return out;
}

double PlantParams::compressor_unit_flow() const {
  return volumetric_efficiency * compressor_volume_m3_per_s / static_cast<double>(num_cases);
}

std::vector<std::string> PlantParams::violations() const {
  std::vector<std::string> out;
  auto positive = [&](const char* name, double v) {
    if (!std::isfinite(v) || v <= 0.0) out.push_back(std::string(name) + " must be strictly positive");
  };
  auto finite = [&](const char* name, double v) {
    if (!std::isfinite(v)) out.push_back(std::string(name) + " must be finite");
  };
  auto per_case = [&](const char* name, const std::vector<double>& v, bool require_positive) {
    if (v.size() != num_cases) {
      out.push_back(std::string(name) + " must have one entry per case (" +
                    std::to_string(num_cases) + "), got " + std::to_string(v.size()));
      return;
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!std::isfinite(v[i]) || (require_positive && v[i] <= 0.0)) {
        out.push_back(std::string(name) + "[" + std::to_string(i + 1) + "] must be " +
                      (require_positive ? "strictly positive" : "finite"));
      }
    }
  };

  if (num_cases < 1) out.push_back("num_cases must be at least 1");
  if (num_compressors < 1) out.push_back("num_compressors must be at least 1");
  per_case("food_mass_kg", food_mass_kg, true);
  per_case("food_heat_capacity", food_heat_capacity, true);
  per_case("air_mass_kg", air_mass_kg, true);
  per_case("air_heat_capacity", air_heat_capacity, true);
  per_case("wall_mass_kg", wall_mass_kg, true);
  per_case("wall_heat_capacity", wall_heat_capacity, true);
  per_case("temp_min_c", temp_min_c, false);
  per_case("temp_max_c", temp_max_c, false);
  if (temp_min_c.size() == num_cases && temp_max_c.size() == num_cases) {
    for (std::size_t i = 0; i < num_cases; ++i)
      if (!(temp_min_c[i] < temp_max_c[i]))
        out.push_back("temp_min_c[" + std::to_string(i + 1) + "] must be below temp_max_c");
  }
  positive("k_food_air", k_food_air);
  positive("k_air_evap", k_air_evap);
  positive("k_amb_air", k_amb_air);
  if (!std::isfinite(k_case_case) || k_case_case < 0.0)
    out.push_back("k_case_case must be finite and nonnegative");
  finite("ambient_temp_c", ambient_temp_c);
  positive("max_refrigerant_mass_kg", max_refrigerant_mass_kg);
  positive("suction_volume_m3", suction_volume_m3);
  if (!std::isfinite(volumetric_efficiency) || volumetric_efficiency <= 0.0 ||
      volumetric_efficiency > 1.0)
    out.push_back("volumetric_efficiency must lie in (0, 1]");
  positive("compressor_volume_m3_per_s", compressor_volume_m3_per_s);
  positive("control_period_s", control_period_s);
  finite("pi_kp", pi_kp);
  if (!std::isfinite(pi_ki) || pi_ki == 0.0) out.push_back("pi_ki must be finite and nonzero");
  positive("suction_pressure_ref_bar", suction_pressure_ref_bar);
  if (!std::isfinite(dead_band_bar) || dead_band_bar < 0.0)
    out.push_back("dead_band_bar must be finite and nonnegative");
  return out;
}

void PlantParams::validate() const {
  auto v = violations();
  if (!v.empty()) throw ConfigError(std::move(v));
}

UnitModel default_params(std::size_t n) {
  PlantParams p;
  p.num_cases = n;
  p.num_compressors = 7;
  p.food_mass_kg.assign(n, 200.0);
  p.food_heat_capacity.assign(n, 1000.0);
  p.air_mass_kg.assign(n, 50.0);
  p.air_heat_capacity.assign(n, 1000.0);
  p.wall_mass_kg.assign(n, 260.0);
  p.wall_heat_capacity.assign(n, 385.0);
  p.temp_min_c.assign(n, 0.0);
  p.temp_max_c.assign(n, 5.0);
  UnitModel model{std::move(p), Topology::chain(n, 500.0)};
  model.params.validate();
  return model;
}

UnitModel default_params() { return default_params(10); }

}  // namespace refctl::thermo
