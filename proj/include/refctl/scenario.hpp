#pragma once

// Closed-loop experiments: one seeded plant driven by a chosen controller,
// with energy, switching, comfort and cost metrics.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "refctl/config.hpp"
#include "refctl/optctl.hpp"
#include "refctl/plant.hpp"

namespace refctl::scenario {

/// Step-wise constant price: the value at the latest point not after t.
struct PriceSeries {
  struct Point {
    double time_s;
    double usd_per_kwh;
  };
  std::vector<Point> points;

  double at(double t) const;
  /// True when [0, horizon] is not covered without constant extension.
  bool extends_beyond(double horizon_s) const;
  void validate() const;
};

/// Header `time_s,price_usd_per_kwh`. Malformed rows raise ConfigError
/// naming the line.
PriceSeries parse_price_csv(std::string_view text);
PriceSeries load_price_csv(const std::string& path);
void write_price_csv(std::ostream& os, const PriceSeries& prices);

/// $0.04/kWh with $0.25/kWh spikes over hours [2, 3) and [5, 6).
PriceSeries synthetic_spike_prices();

struct Metrics {
  double average_power_kw = 0.0;
  std::size_t switchings = 0;
  double violation_integral = 0.0;   // sum_i int (T_air,i - T_max)_+ dt [°C s]
  double max_excursion_c = 0.0;      // food temperature above T_max
  double max_air_excursion_c = 0.0;
  double cost_usd = 0.0;
  double energy_kwh = 0.0;
  bool prices_extended = false;
};

struct PeriodRecord {
  double time_s = 0.0;
  std::size_t valves_open = 0;
  std::size_t valve_cap = 0;
  std::size_t compressors_on = 0;
  double price = 0.0;
};

struct RunResult {
  ControllerKind controller = ControllerKind::pi;
  plant::Trajectory trajectory;
  std::vector<PeriodRecord> periods;
  std::vector<opt::StepDiagnostics> diagnostics;
  Metrics metrics;

  /// Periods at which the open-valve count exceeded the cap.
  std::size_t cap_violations() const;
};

/// Each nominal mass scaled by an independent U[0.8, 1.2] draw.
std::vector<double> perturb_food_mass(const std::vector<double>& nominal, std::uint64_t seed);
std::vector<double> perturb_food_mass(double nominal, std::size_t n, std::uint64_t seed);

/// Valve ceiling for one period: floor(fraction n) above the threshold, n otherwise.
std::size_t dr_cap_policy(double price, const ScenarioSettings& s, std::size_t n);

/// Per-compressor bit changes between consecutive inputs.
std::size_t count_switchings(const plant::Trajectory& traj);

struct EnergyCost {
  double cost_usd = 0.0;
  double energy_kwh = 0.0;
  bool extended = false;
};
EnergyCost energy_and_cost(const plant::Trajectory& traj, const PriceSeries& prices);

Metrics compute_metrics(const plant::Trajectory& traj, const thermo::PlantParams& p,
                        const PriceSeries* prices);

/// Plant parameters after the seeded food-mass perturbation, if enabled.
thermo::PlantParams scenario_params(const Config& config);

/// Runs one controller. With `prices`, the demand-response cap applies to the
/// optimizing controllers and metrics include cost.
RunResult run_closed_loop(const Config& config, ControllerKind controller, const PriceSeries* prices = nullptr);

std::string metrics_json(const RunResult& run, const Config& config);

}  // namespace refctl::scenario
