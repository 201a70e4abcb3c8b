#include "refctl/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace refctl::baseline {

BitVector hysteresis_valve_law(const Eigen::VectorXd& air_temp, HysteresisState& state,
                               const PlantParams& p) {
  const auto n = static_cast<std::size_t>(air_temp.size());
  if (state.previous.size() != n) state.previous.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = air_temp(static_cast<Eigen::Index>(i));
    if (t > p.temp_max_c[i]) state.previous[i] = 1;
    else if (t < p.temp_min_c[i]) state.previous[i] = 0;
  }
  return state.previous;
}

double pi_error(double suction_pressure_bar, const PlantParams& p) {
  const double d = suction_pressure_bar - p.suction_pressure_ref_bar;
  return std::abs(d) > p.dead_band_bar ? d : 0.0;
}

double pi_output(double error, PIState& state, double h, const PlantParams& p) {
  if (!(h > 0.0)) throw std::invalid_argument("pi_output: step must be positive");
  state.accumulator += error * h;
  return p.pi_kp * error + state.accumulator / p.pi_ki;
}

BitVector compressor_thresholding(double u_pi, const PlantParams& p) {
  const double nc = static_cast<double>(p.num_compressors);
  const double on = std::isnan(u_pi) ? 0.0 : std::clamp(std::floor(u_pi), 0.0, nc);
  BitVector out(p.num_compressors, 0);
  std::fill_n(out.begin(), static_cast<std::size_t>(on), 1);
  return out;
}

BitVector PIController::update(double suction_pressure_bar, double h) {
  const double e = -pi_error(suction_pressure_bar, params_);
  // Integral contribution of this update is e h / K_I.
  const double push = e * h / params_.pi_ki;
  const bool at_floor = state_.compressors_on == 0 && push < 0.0;
  const bool at_ceiling = state_.compressors_on == params_.num_compressors && push > 0.0;
  double u;
  if (at_floor || at_ceiling) {
    u = params_.pi_kp * e + state_.accumulator / params_.pi_ki;
  } else {
    u = pi_output(e, state_, h, params_);
  }
  auto bits = compressor_thresholding(u, params_);
  state_.compressors_on = plant::count_on(bits);
  return bits;
}

BaselineController::BaselineController(const PlantParams& p, const BitVector& initial_valves)
    : params_(p), hysteresis_{initial_valves}, pi_(p) {}

BitVector BaselineController::valves(const Eigen::VectorXd& air_temp) {
  return hysteresis_valve_law(air_temp, hysteresis_, params_);
}

BitVector BaselineController::compressors(double suction_pressure_bar) {
  return pi_.update(suction_pressure_bar, params_.control_period_s);
}

}  // namespace refctl::baseline
