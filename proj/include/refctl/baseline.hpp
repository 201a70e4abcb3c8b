#pragma once

// Conventional controller: per-case ON/OFF hysteresis on the air
// temperature and a dead-banded PI loop on suction pressure that sets the
// number of running compressors.

#include <cstddef>

#include <Eigen/Dense>

#include "refctl/plant.hpp"
#include "refctl/thermo.hpp"

namespace refctl::baseline {

using plant::BitVector;
using thermo::PlantParams;

struct HysteresisState {
  BitVector previous;
};

/// u_i = 1 above T_max, 0 below T_min, previous value otherwise.
BitVector hysteresis_valve_law(const Eigen::VectorXd& air_temp, HysteresisState& state,
                               const PlantParams& p);

struct PIState {
  double accumulator = 0.0;  // [bar s]
  std::size_t compressors_on = 0;
};

/// P_suc - reference, or 0 when inside the dead band.
double pi_error(double suction_pressure_bar, const PlantParams& p);

/// accumulator += e h; returns K_P e + accumulator / K_I.
double pi_output(double error, PIState& state, double h, const PlantParams& p);

/// First clamp(floor(u), 0, n_c) compressors ON.
BitVector compressor_thresholding(double u_pi, const PlantParams& p);

/// Closed-loop PI with anti-windup. The loop is reverse-acting: pressure above
/// the reference drives the output (and so the ON count) up.
class PIController {
 public:
  explicit PIController(const PlantParams& p) : params_(p) {}

  BitVector update(double suction_pressure_bar, double h);
  const PIState& state() const { return state_; }

 private:
  PlantParams params_;
  PIState state_;
};

class BaselineController {
 public:
  BaselineController(const PlantParams& p, const BitVector& initial_valves);

  /// Called every integrator step.
  BitVector valves(const Eigen::VectorXd& air_temp);
  /// Called once per control period.
  BitVector compressors(double suction_pressure_bar);

 private:
  PlantParams params_;
  HysteresisState hysteresis_;
  PIController pi_;
};

}  // namespace refctl::baseline
