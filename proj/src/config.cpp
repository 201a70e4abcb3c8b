#include "refctl/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include "refctl/errors.hpp"

namespace refctl {

std::string_view to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::pi: return "pi";
    case ControllerKind::linear: return "linear";
    case ControllerKind::greedy: return "greedy";
    case ControllerKind::oracle: return "oracle";
  }
  return "unknown";
}

std::optional<ControllerKind> parse_controller(std::string_view text) {
  if (text == "pi") return ControllerKind::pi;
  if (text == "linear") return ControllerKind::linear;
  if (text == "greedy" || text == "submodular") return ControllerKind::greedy;
  if (text == "oracle" || text == "exhaustive") return ControllerKind::oracle;
  return std::nullopt;
}

namespace {

std::string_view topology_name(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::chain: return "chain";
    case TopologyKind::ring: return "ring";
    case TopologyKind::isolated: return "isolated";
    case TopologyKind::matrix: return "matrix";
  }
  return "chain";
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::optional<double> parse_number(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<std::uint64_t> parse_unsigned(std::string_view s) {
  s = trim(s);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

struct Entry {
  std::string value;
  int line;
};

class Parser {
 public:
  explicit Parser(std::map<std::string, Entry> entries) : entries_(std::move(entries)) {}

  std::vector<std::string> errors;

  template <typename F>
  void take(const std::string& key, F&& apply) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return;
    current_ = &it->second;
    apply(std::string_view(it->second.value));
    entries_.erase(it);
  }

  void number(const std::string& key, double& out) {
    take(key, [&](std::string_view v) {
      if (auto d = parse_number(v)) out = *d;
      else fail(key, "expects a number");
    });
  }

  void count(const std::string& key, std::size_t& out) {
    take(key, [&](std::string_view v) {
      if (auto u = parse_unsigned(v)) out = static_cast<std::size_t>(*u);
      else fail(key, "expects a nonnegative integer");
    });
  }

  void per_case(const std::string& key, std::vector<double>& out, std::size_t n) {
    take(key, [&](std::string_view v) {
      std::vector<double> values;
      for (auto part : split(v, ',')) {
        auto d = parse_number(part);
        if (!d) {
          fail(key, "expects a number or a comma-separated list of numbers");
          return;
        }
        values.push_back(*d);
      }
      if (values.size() == 1) values.assign(n, values.front());
      out = std::move(values);
    });
  }

  void fail(const std::string& key, const std::string& what) {
    errors.push_back("line " + std::to_string(current_ ? current_->line : 0) + ": '" + key + "' " +
                     what);
  }

  void reject_leftovers() {
    for (const auto& [key, entry] : entries_)
      errors.push_back("line " + std::to_string(entry.line) + ": unknown key '" + key + "'");
  }

 private:
  std::map<std::string, Entry> entries_;
  const Entry* current_ = nullptr;
};

thermo::Topology make_topology(TopologyKind kind, std::size_t n, double k) {
  switch (kind) {
    case TopologyKind::ring: return thermo::Topology::ring(n, k);
    case TopologyKind::isolated: return thermo::Topology::isolated(n);
    default: return thermo::Topology::chain(n, k);
  }
}

void write_per_case(std::ostream& os, const char* key, const std::vector<double>& v) {
  os << key << " = ";
  bool uniform = !v.empty();
  for (double x : v) uniform = uniform && x == v.front();
  if (uniform) {
    os << format_double(v.front());
  } else {
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << format_double(v[i]);
  }
  os << '\n';
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ec == std::errc{} ? ptr : buf);
}

std::vector<std::string> Config::violations() const {
  auto out = params.violations();
  if (topology.size() != params.num_cases) {
    out.push_back("topology size " + std::to_string(topology.size()) +
                  " does not match num_cases " + std::to_string(params.num_cases));
  } else {
    auto t = topology.violations();
    out.insert(out.end(), t.begin(), t.end());
  }
  if (!std::isfinite(controller.delta) || controller.delta < 0.0)
    out.push_back("delta must be finite and nonnegative");
  if (controller.prediction_samples < 2) out.push_back("prediction_samples must be at least 2");
  if (!std::isfinite(simulation.integrator_step_s) || simulation.integrator_step_s <= 0.0)
    out.push_back("integrator_step_s must be strictly positive");
  if (!std::isfinite(simulation.initial_temp_c)) out.push_back("initial_temp_c must be finite");
  if (!std::isfinite(simulation.initial_pressure_bar) || simulation.initial_pressure_bar <= 0.0)
    out.push_back("initial_pressure_bar must be strictly positive");
  if (!std::isfinite(scenario.duration_s) || scenario.duration_s <= 0.0)
    out.push_back("duration_s must be strictly positive");
  if (!std::isfinite(scenario.dr_price_threshold) || scenario.dr_price_threshold < 0.0)
    out.push_back("dr_price_threshold must be finite and nonnegative");
  if (!(scenario.dr_cap_fraction > 0.0 && scenario.dr_cap_fraction <= 1.0))
    out.push_back("dr_cap_fraction must lie in (0, 1]");
  return out;
}

void Config::validate() const {
  auto v = violations();
  if (!v.empty()) throw ConfigError(std::move(v));
}

Config default_config() {
  auto unit = thermo::default_params();
  Config c;
  c.params = std::move(unit.params);
  c.topology = std::move(unit.topology);
  return c;
}

Config parse_config(std::string_view text) {
  std::map<std::string, Entry> entries;
  std::vector<std::string> errors;
  int line_no = 0;
  for (auto raw : split(text, '\n')) {
    ++line_no;
    auto line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      errors.push_back("line " + std::to_string(line_no) + ": expected 'key = value'");
      continue;
    }
    std::string key(trim(line.substr(0, eq)));
    std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) {
      errors.push_back("line " + std::to_string(line_no) + ": missing key");
      continue;
    }
    if (!entries.emplace(key, Entry{value, line_no}).second)
      errors.push_back("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
  }

  Config c = default_config();
  auto& p = c.params;
  Parser in(std::move(entries));
  in.errors = std::move(errors);

  in.count("num_cases", p.num_cases);
  in.count("num_compressors", p.num_compressors);
  const std::size_t n = p.num_cases;
  // Per-case defaults follow the case count before any override.
  for (auto* v : {&p.food_mass_kg, &p.food_heat_capacity, &p.air_mass_kg, &p.air_heat_capacity,
                  &p.wall_mass_kg, &p.wall_heat_capacity, &p.temp_min_c, &p.temp_max_c})
    v->assign(n, v->empty() ? 0.0 : v->front());

  in.per_case("food_mass_kg", p.food_mass_kg, n);
  in.per_case("food_heat_capacity", p.food_heat_capacity, n);
  in.per_case("air_mass_kg", p.air_mass_kg, n);
  in.per_case("air_heat_capacity", p.air_heat_capacity, n);
  in.per_case("wall_mass_kg", p.wall_mass_kg, n);
  in.per_case("wall_heat_capacity", p.wall_heat_capacity, n);
  in.per_case("temp_min_c", p.temp_min_c, n);
  in.per_case("temp_max_c", p.temp_max_c, n);
  in.number("k_food_air", p.k_food_air);
  in.number("k_air_evap", p.k_air_evap);
  in.number("k_amb_air", p.k_amb_air);
  in.number("k_case_case", p.k_case_case);
  in.number("ambient_temp_c", p.ambient_temp_c);
  in.number("max_refrigerant_mass_kg", p.max_refrigerant_mass_kg);
  in.number("suction_volume_m3", p.suction_volume_m3);
  in.number("volumetric_efficiency", p.volumetric_efficiency);
  in.number("compressor_volume_m3_per_s", p.compressor_volume_m3_per_s);
  in.number("control_period_s", p.control_period_s);
  in.number("pi_kp", p.pi_kp);
  in.number("pi_ki", p.pi_ki);
  in.number("suction_pressure_ref_bar", p.suction_pressure_ref_bar);
  in.number("dead_band_bar", p.dead_band_bar);

  std::optional<Eigen::MatrixXd> explicit_matrix;
  in.take("topology", [&](std::string_view v) {
    if (v == "chain") c.topology_kind = TopologyKind::chain;
    else if (v == "ring") c.topology_kind = TopologyKind::ring;
    else if (v == "isolated") c.topology_kind = TopologyKind::isolated;
    else if (v == "matrix") c.topology_kind = TopologyKind::matrix;
    else in.fail("topology", "must be one of chain, ring, isolated, matrix");
  });
  in.take("topology_matrix", [&](std::string_view v) {
    const auto rows = split(v, ';');
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto cols = split(rows[i], ',');
      if (cols.size() != rows.size()) {
        in.fail("topology_matrix", "must be square (rows separated by ';', entries by ',')");
        return;
      }
      for (std::size_t j = 0; j < cols.size(); ++j) {
        auto d = parse_number(cols[j]);
        if (!d) {
          in.fail("topology_matrix", "has a non-numeric entry");
          return;
        }
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = *d;
      }
    }
    explicit_matrix = std::move(m);
  });

  in.number("delta", c.controller.delta);
  in.take("variant", [&](std::string_view v) {
    auto kind = parse_controller(v);
    if (kind && *kind != ControllerKind::pi) c.controller.variant = *kind;
    else in.fail("variant", "must be one of linear, greedy, oracle");
  });
  in.count("prediction_samples", c.controller.prediction_samples);
  in.number("integrator_step_s", c.simulation.integrator_step_s);
  in.number("initial_temp_c", c.simulation.initial_temp_c);
  in.number("initial_pressure_bar", c.simulation.initial_pressure_bar);
  in.number("duration_s", c.scenario.duration_s);
  in.take("seed", [&](std::string_view v) {
    if (auto u = parse_unsigned(v)) c.scenario.seed = *u;
    else in.fail("seed", "expects a nonnegative integer");
  });
  in.take("perturb_food_mass", [&](std::string_view v) {
    if (v == "true") c.scenario.perturb_food_mass = true;
    else if (v == "false") c.scenario.perturb_food_mass = false;
    else in.fail("perturb_food_mass", "must be true or false");
  });
  in.number("dr_price_threshold", c.scenario.dr_price_threshold);
  in.number("dr_cap_fraction", c.scenario.dr_cap_fraction);
  in.reject_leftovers();

  if (c.topology_kind == TopologyKind::matrix) {
    if (explicit_matrix) c.topology = thermo::Topology(*explicit_matrix);
    else in.errors.push_back("topology = matrix requires topology_matrix");
  } else {
    if (explicit_matrix) in.errors.push_back("topology_matrix is only allowed with topology = matrix");
    c.topology = make_topology(c.topology_kind, n, p.k_case_case);
  }

  auto errs = std::move(in.errors);
  auto more = c.violations();
  errs.insert(errs.end(), more.begin(), more.end());
  if (!errs.empty()) throw ConfigError(std::move(errs));
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError({"cannot read configuration file '" + path.string() + "'"});
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void write_config(std::ostream& os, const Config& c) {
  const auto& p = c.params;
  auto num = [&](const char* key, double v, const char* comment) {
    os << key << " = " << format_double(v) << "  # " << comment << '\n';
  };
  os << "# refrigeration unit configuration\n\n";
  os << "# --- display cases ---\n";
  os << "num_cases = " << p.num_cases << '\n';
  os << "num_compressors = " << p.num_compressors << '\n';
  os << "# per-case values: one number for all cases, or a comma-separated list\n";
  os << "# food mass [kg]\n";
  write_per_case(os, "food_mass_kg", p.food_mass_kg);
  os << "# food heat capacity [J/(kg K)]\n";
  write_per_case(os, "food_heat_capacity", p.food_heat_capacity);
  os << "# air mass [kg]\n";
  write_per_case(os, "air_mass_kg", p.air_mass_kg);
  os << "# air heat capacity [J/(kg K)]\n";
  write_per_case(os, "air_heat_capacity", p.air_heat_capacity);
  os << "# evaporator wall mass [kg] and heat capacity [J/(kg K)] (not simulated)\n";
  write_per_case(os, "wall_mass_kg", p.wall_mass_kg);
  write_per_case(os, "wall_heat_capacity", p.wall_heat_capacity);
  os << "# desirable air temperature band [°C]\n";
  write_per_case(os, "temp_min_c", p.temp_min_c);
  write_per_case(os, "temp_max_c", p.temp_max_c);
  os << "\n# --- heat transfer [J/(s K)] ---\n";
  num("k_food_air", p.k_food_air, "food <-> case air");
  num("k_air_evap", p.k_air_evap, "case air <-> evaporator");
  num("k_amb_air", p.k_amb_air, "ambient <-> case air");
  num("k_case_case", p.k_case_case, "neighboring case air (chain/ring topologies)");
  os << "topology = " << topology_name(c.topology_kind) << "  # chain | ring | isolated | matrix\n";
  if (c.topology_kind == TopologyKind::matrix) {
    os << "topology_matrix = ";
    const auto& m = c.topology.matrix();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if (i) os << "; ";
      for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? ", " : "") << format_double(m(i, j));
    }
    os << '\n';
  }
  num("ambient_temp_c", p.ambient_temp_c, "[°C]");
  os << "\n# --- refrigerant circuit ---\n";
  num("max_refrigerant_mass_kg", p.max_refrigerant_mass_kg, "evaporator charge when open [kg]");
  num("suction_volume_m3", p.suction_volume_m3, "suction manifold volume [m^3]");
  num("volumetric_efficiency", p.volumetric_efficiency, "compressor volumetric efficiency (0, 1]");
  num("compressor_volume_m3_per_s", p.compressor_volume_m3_per_s, "rack displacement [m^3/s]");
  os << "\n# --- control ---\n";
  num("control_period_s", p.control_period_s, "[s]");
  num("pi_kp", p.pi_kp, "PI proportional gain");
  num("pi_ki", p.pi_ki, "PI integral constant (output uses 1/pi_ki)");
  num("suction_pressure_ref_bar", p.suction_pressure_ref_bar, "[bar]");
  num("dead_band_bar", p.dead_band_bar, "[bar]");
  num("delta", c.controller.delta, "overshoot threshold [°C^2 s]");
  os << "variant = " << to_string(c.controller.variant) << "  # linear | greedy | oracle\n";
  os << "prediction_samples = " << c.controller.prediction_samples
     << "  # samples per control period\n";
  os << "\n# --- simulation ---\n";
  num("integrator_step_s", c.simulation.integrator_step_s, "[s]");
  num("initial_temp_c", c.simulation.initial_temp_c, "food and air [°C]");
  num("initial_pressure_bar", c.simulation.initial_pressure_bar, "[bar]");
  os << "\n# --- scenario ---\n";
  num("duration_s", c.scenario.duration_s, "[s]");
  os << "seed = " << c.scenario.seed << '\n';
  os << "perturb_food_mass = " << (c.scenario.perturb_food_mass ? "true" : "false")
     << "  # +/-20% around food_mass_kg\n";
  num("dr_price_threshold", c.scenario.dr_price_threshold, "[$/kWh]");
  num("dr_cap_fraction", c.scenario.dr_cap_fraction, "share of valves allowed open above threshold");
}

std::string format_config(const Config& config) {
  std::ostringstream os;
  write_config(os, config);
  return os.str();
}

}  // namespace refctl
