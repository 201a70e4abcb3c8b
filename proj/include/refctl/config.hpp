#pragma once

// Plain-text configuration: one `key = value` per line, `#` starts a comment.
// Per-case keys take either one value (applied to every case) or a
// comma-separated list with one entry per case. Unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

#include "refctl/thermo.hpp"

namespace refctl {

enum class ControllerKind { pi, linear, greedy, oracle };
enum class TopologyKind { chain, ring, isolated, matrix };

std::string_view to_string(ControllerKind kind);
std::optional<ControllerKind> parse_controller(std::string_view text);

struct ControllerSettings {
  double delta = 1.0;                    // violation threshold [°C^2 s]
  ControllerKind variant = ControllerKind::linear;
  std::size_t prediction_samples = 61;   // samples per control period, endpoints included
};

struct SimulationSettings {
  double integrator_step_s = 1.0;
  double initial_temp_c = 3.0;
  double initial_pressure_bar = 1.4;
};

struct ScenarioSettings {
  double duration_s = 8.0 * 3600.0;
  std::uint64_t seed = 2013;
  bool perturb_food_mass = true;
  double dr_price_threshold = 0.1;  // $/kWh, strict ">" activates the cap
  double dr_cap_fraction = 0.7;
};

struct Config {
  thermo::PlantParams params;
  TopologyKind topology_kind = TopologyKind::chain;
  thermo::Topology topology;
  ControllerSettings controller;
  SimulationSettings simulation;
  ScenarioSettings scenario;

  std::vector<std::string> violations() const;
  void validate() const;
};

Config default_config();

/// Parses configuration text; throws ConfigError naming every problem.
Config parse_config(std::string_view text);
Config load_config(const std::filesystem::path& path);

/// Writes a configuration that parses back to an identical Config.
void write_config(std::ostream& os, const Config& config);
std::string format_config(const Config& config);

/// Shortest decimal representation that reads back to the same double.
std::string format_double(double value);

}  // namespace refctl
