#include "refctl/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "refctl/baseline.hpp"
#include "refctl/errors.hpp"
#include "refctl/oracle.hpp"

namespace refctl::scenario {

double PriceSeries::at(double t) const {
  if (points.empty()) throw std::invalid_argument("empty price series");
  auto it = std::upper_bound(points.begin(), points.end(), t,
                             [](double v, const Point& p) { return v < p.time_s; });
  if (it == points.begin()) return points.front().usd_per_kwh;
  return std::prev(it)->usd_per_kwh;
}

bool PriceSeries::extends_beyond(double horizon_s) const {
  return points.empty() || points.front().time_s > 0.0 || points.back().time_s < horizon_s;
}

void PriceSeries::validate() const {
  std::vector<std::string> errors;
  if (points.empty()) errors.push_back("price series has no points");
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (!std::isfinite(points[k].usd_per_kwh) || points[k].usd_per_kwh < 0.0)
      errors.push_back("price point " + std::to_string(k + 1) + " is negative or not finite");
    if (k > 0 && !(points[k].time_s > points[k - 1].time_s))
      errors.push_back("price point " + std::to_string(k + 1) + " does not increase in time");
  }
  if (!errors.empty()) throw ConfigError(std::move(errors));
}

PriceSeries parse_price_csv(std::string_view text) {
  PriceSeries series;
  std::vector<std::string> errors;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header) {
      if (line != "time_s,price_usd_per_kwh")
        errors.push_back("line " + std::to_string(line_no) + ": expected header 'time_s,price_usd_per_kwh'");
      header = true;
      continue;
    }
    const auto comma = line.find(',');
    std::size_t used_t = 0, used_p = 0;
    try {
      if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
        throw std::invalid_argument("field count");
      const std::string ts = line.substr(0, comma), ps = line.substr(comma + 1);
      const double t = std::stod(ts, &used_t);
      const double p = std::stod(ps, &used_p);
      if (used_t != ts.size() || used_p != ps.size()) throw std::invalid_argument("trailing text");
      if (!std::isfinite(t) || !std::isfinite(p) || p < 0.0) throw std::invalid_argument("range");
      if (!series.points.empty() && !(t > series.points.back().time_s)) {
        errors.push_back("line " + std::to_string(line_no) + ": time does not increase");
        continue;
      }
      series.points.push_back({t, p});
    } catch (const std::exception&) {
      errors.push_back("line " + std::to_string(line_no) + ": malformed price row '" + line + "'");
    }
  }
  if (!header) errors.push_back("price file is empty");
  else if (series.points.empty() && errors.empty()) errors.push_back("price file has no rows");
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return series;
}

PriceSeries load_price_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot read price file '" + path + "'"});
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_price_csv(ss.str());
}

void write_price_csv(std::ostream& os, const PriceSeries& prices) {
  os << "time_s,price_usd_per_kwh\n";
  for (const auto& p : prices.points) os << format_double(p.time_s) << ',' << format_double(p.usd_per_kwh) << '\n';
}

PriceSeries synthetic_spike_prices() {
  constexpr double base = 0.04, spike = 0.25, hour = 3600.0;
  return {{{0.0, base}, {2 * hour, spike}, {3 * hour, base}, {5 * hour, spike}, {6 * hour, base}}};
}

std::size_t RunResult::cap_violations() const {
  return static_cast<std::size_t>(std::count_if(periods.begin(), periods.end(),
                                                [](const PeriodRecord& r) { return r.valves_open > r.valve_cap; }));
}

std::vector<double> perturb_food_mass(const std::vector<double>& nominal, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> out(nominal.size());
  for (std::size_t i = 0; i < nominal.size(); ++i) out[i] = nominal[i] * (0.8 + 0.4 * oracle::uniform01(rng));
  return out;
}

std::vector<double> perturb_food_mass(double nominal, std::size_t n, std::uint64_t seed) {
  return perturb_food_mass(std::vector<double>(n, nominal), seed);
}

std::size_t dr_cap_policy(double price, const ScenarioSettings& s, std::size_t n) {
  if (price > s.dr_price_threshold)
    return static_cast<std::size_t>(std::floor(s.dr_cap_fraction * static_cast<double>(n) + 1e-12));
  return n;
}

std::size_t count_switchings(const plant::Trajectory& traj) {
  std::size_t count = 0;
  for (std::size_t k = 1; k < traj.controls.size(); ++k) {
    const auto& a = traj.controls[k - 1].compressors;
    const auto& b = traj.controls[k].compressors;
    if (a.size() != b.size()) throw std::invalid_argument("compressor count changes along the trajectory");
    for (std::size_t i = 0; i < a.size(); ++i) count += a[i] != b[i];
  }
  return count;
}

EnergyCost energy_and_cost(const plant::Trajectory& traj, const PriceSeries& prices) {
  if (prices.points.empty()) throw std::invalid_argument("energy_and_cost: empty price series");
  EnergyCost out;
  out.extended = traj.time_s.empty() ? false : prices.extends_beyond(traj.time_s.back());
  double joules = 0.0, dollars_joules = 0.0;
  for (std::size_t k = 0; k < traj.power_w.size(); ++k) {
    double t = traj.time_s[k];
    const double end = traj.time_s[k + 1];
    const double p = traj.power_w[k];
    joules += p * (end - t);
    // Split the interval at price breakpoints.
    while (t < end) {
      auto next = std::upper_bound(prices.points.begin(), prices.points.end(), t,
                                   [](double v, const PriceSeries::Point& q) { return v < q.time_s; });
      const double stop = next == prices.points.end() ? end : std::min(end, next->time_s);
      dollars_joules += p * (stop - t) * prices.at(t);
      t = stop;
    }
  }
  out.energy_kwh = joules / 3.6e6;
  out.cost_usd = dollars_joules / 3.6e6;
  return out;
}

Metrics compute_metrics(const plant::Trajectory& traj, const thermo::PlantParams& p, const PriceSeries* prices) {
  traj.check_invariants();
  Metrics m;
  const PriceSeries zero{{{0.0, 0.0}}};
  const auto ec = energy_and_cost(traj, prices ? *prices : zero);
  m.energy_kwh = ec.energy_kwh;
  m.cost_usd = prices ? ec.cost_usd : 0.0;
  m.prices_extended = prices && ec.extended;
  const double horizon = traj.time_s.back() - traj.time_s.front();
  m.average_power_kw = horizon > 0.0 ? m.energy_kwh * 3.6e6 / horizon / 1000.0 : 0.0;
  m.switchings = count_switchings(traj);

  const auto n = p.num_cases;
  auto overshoot = [&](const plant::PlantState& s) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      const double air = s.air_temp(k) - p.temp_max_c[i];
      const double food = s.food_temp(k) - p.temp_max_c[i];
      sum += std::max(air, 0.0);
      m.max_air_excursion_c = std::max(m.max_air_excursion_c, air);
      m.max_excursion_c = std::max(m.max_excursion_c, food);
    }
    return sum;
  };
  double previous = overshoot(traj.states.front());
  for (std::size_t k = 1; k < traj.states.size(); ++k) {
    const double current = overshoot(traj.states[k]);
    m.violation_integral += 0.5 * (previous + current) * (traj.time_s[k] - traj.time_s[k - 1]);
    previous = current;
  }
  return m;
}

thermo::PlantParams scenario_params(const Config& config) {
  auto p = config.params;
  if (config.scenario.perturb_food_mass) p.food_mass_kg = perturb_food_mass(p.food_mass_kg, config.scenario.seed);
  return p;
}

RunResult run_closed_loop(const Config& config, ControllerKind controller, const PriceSeries* prices) {
  config.validate();
  if (prices) prices->validate();
  const auto p = scenario_params(config);
  const auto& topo = config.topology;
  const double h = config.simulation.integrator_step_s;
  const double period = p.control_period_s;
  const double duration = config.scenario.duration_s;
  const auto steps_per_period = static_cast<std::size_t>(std::llround(period / h));
  if (std::abs(static_cast<double>(steps_per_period) * h - period) > 1e-9)
    throw ConfigError({"control_period_s must be a whole multiple of integrator_step_s"});
  const auto total_steps = static_cast<std::size_t>(std::ceil(duration / h - 1e-9));

  RunResult run;
  run.controller = controller;
  auto& traj = run.trajectory;
  auto state = plant::PlantState::uniform(p.num_cases, config.simulation.initial_temp_c,
                                          config.simulation.initial_pressure_bar);
  traj.time_s.reserve(total_steps + 1);
  traj.states.reserve(total_steps + 1);
  traj.time_s.push_back(0.0);
  traj.states.push_back(state);

  std::optional<baseline::BaselineController> pi;
  std::optional<opt::OptimizingController> optimizer;
  if (controller == ControllerKind::pi) {
    pi.emplace(p, plant::BitVector(p.num_cases, 0));
  } else {
    opt::BilevelSolver solver;
    if (controller == ControllerKind::oracle) {
      solver = [](const opt::InnerProblem& problem) { return oracle::exhaustive_bilevel(problem); };
    } else {
      solver = opt::solver_for(controller == ControllerKind::greedy ? opt::Variant::greedy : opt::Variant::linear);
    }
    optimizer.emplace(p, topo, config.controller.delta, config.controller.prediction_samples, std::move(solver));
  }

  plant::ControlInput input = plant::ControlInput::closed(p.num_cases, p.num_compressors);
  double t = 0.0;
  for (std::size_t k = 0; k < total_steps; ++k) {
    const double dt = std::min(h, duration - t);
    if (k % steps_per_period == 0) {
      const double price = prices ? prices->at(t) : 0.0;
      std::size_t cap = p.num_cases;
      if (pi) {
        input.compressors = pi->compressors(state.suction_pressure);
      } else {
        if (prices) cap = dr_cap_policy(price, config.scenario, p.num_cases);
        input = optimizer->decide(state, cap, t);
      }
      run.periods.push_back({t, 0, cap, plant::count_on(input.compressors), price});
    }
    if (pi) input.valves = pi->valves(state.air_temp);
    if (k % steps_per_period == 0) run.periods.back().valves_open = plant::count_on(input.valves);
    traj.power_w.push_back(plant::total_power(state, input.compressors, p));
    traj.controls.push_back(input);
    state = plant::step(state, input, dt, p, topo, t);
    t += dt;
    traj.time_s.push_back(t);
    traj.states.push_back(state);
  }
  if (optimizer) run.diagnostics = optimizer->diagnostics();
  run.metrics = compute_metrics(traj, p, prices);
  return run;
}

std::string metrics_json(const RunResult& run, const Config& config) {
  const auto& m = run.metrics;
  nlohmann::ordered_json j;
  j["controller"] = std::string(to_string(run.controller));
  j["seed"] = config.scenario.seed;
  j["average_power_kw"] = m.average_power_kw;
  j["switchings"] = m.switchings;
  j["violation_integral_c_s"] = m.violation_integral;
  j["max_excursion_c"] = m.max_excursion_c;
  j["max_air_excursion_c"] = m.max_air_excursion_c;
  j["cost_usd"] = m.cost_usd;
  j["energy_kwh"] = m.energy_kwh;
  j["prices_extended"] = m.prices_extended;
  j["cap_violations"] = run.cap_violations();
  j["config"] = format_config(config);
  return j.dump(2) + "\n";
}

}  // namespace refctl::scenario
