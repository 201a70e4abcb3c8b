#include "refctl/plant.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "refctl/errors.hpp"

namespace refctl::plant {

std::size_t count_on(const BitVector& bits) {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](auto b) { return b != 0; }));
}

Eigen::VectorXd to_vector(const BitVector& bits) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(bits.size()));
  for (std::size_t i = 0; i < bits.size(); ++i) v(static_cast<Eigen::Index>(i)) = bits[i] ? 1.0 : 0.0;
  return v;
}

PlantState PlantState::uniform(std::size_t n, double temp_c, double pressure_bar) {
  const auto m = static_cast<Eigen::Index>(n);
  return {Eigen::VectorXd::Constant(m, temp_c), Eigen::VectorXd::Constant(m, temp_c), pressure_bar};
}

ControlInput ControlInput::closed(std::size_t n, std::size_t nc) {
  return {BitVector(n, 0), BitVector(nc, 0)};
}

double food_temp_derivative(const PlantState& s, const PlantParams& p, std::size_t i) {
  const auto k = static_cast<Eigen::Index>(i);
  return -p.k_food_air * (s.food_temp(k) - s.air_temp(k)) /
         (p.food_mass_kg[i] * p.food_heat_capacity[i]);
}

double air_temp_derivative(const PlantState& s, const BitVector& valves, const PlantParams& p,
                           const Topology& topo, double evap_temp_c, std::size_t i) {
  const auto k = static_cast<Eigen::Index>(i);
  const double t_air = s.air_temp(k);
  double neighbors = 0.0;
  for (std::size_t j = 0; j < topo.size(); ++j)
    neighbors += topo(i, j) * (s.air_temp(static_cast<Eigen::Index>(j)) - t_air);
  const double q = p.k_food_air * (s.food_temp(k) - t_air) + p.k_amb_air * (p.ambient_temp_c - t_air) -
                   p.k_air_evap * (t_air - evap_temp_c * (valves[i] ? 1.0 : 0.0)) + neighbors;
  return q / (p.air_mass_kg[i] * p.air_heat_capacity[i]);
}

double valve_mass_flow(std::uint8_t valve, const PlantParams& p) {
  return valve ? p.max_refrigerant_mass_kg / p.control_period_s : 0.0;
}

double compressor_volume_flow(std::uint8_t compressor, const PlantParams& p) {
  return compressor ? p.compressor_unit_flow() : 0.0;
}

namespace {

double total_compressor_flow(const BitVector& compressors, const PlantParams& p) {
  return static_cast<double>(count_on(compressors)) * p.compressor_unit_flow();
}

double total_valve_flow(const BitVector& valves, const PlantParams& p) {
  return static_cast<double>(count_on(valves)) * valve_mass_flow(1, p);
}

// Packed state derivative for (T_food, T_air, P_suc) under relaxed valve inputs.
struct Derivative {
  const PlantParams& p;
  const Topology& topo;
  const Eigen::VectorXd& valves;
  double compressor_flow;  // m^3/s
  double valve_flow;       // kg/s
  std::optional<double> fixed_evap;

  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const {
    const auto n = static_cast<Eigen::Index>(p.num_cases);
    const double pressure = x(2 * n);
    const double evap = fixed_evap ? *fixed_evap : thermo::evaporation_temperature(pressure);
    Eigen::VectorXd dx(2 * n + 1);
    const auto food = x.head(n);
    const auto air = x.segment(n, n);
    const Eigen::VectorXd exchange = topo.matrix() * air;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const double food_to_air = p.k_food_air * (food(i) - air(i));
      dx(i) = -food_to_air / (p.food_mass_kg[ui] * p.food_heat_capacity[ui]);
      const double q = food_to_air + p.k_amb_air * (p.ambient_temp_c - air(i)) -
                       p.k_air_evap * (air(i) - evap * valves(i)) + exchange(i) -
                       topo.row_sum(ui) * air(i);
      dx(n + i) = q / (p.air_mass_kg[ui] * p.air_heat_capacity[ui]);
    }
    if (fixed_evap) {
      dx(2 * n) = 0.0;
    } else {
      dx(2 * n) = (valve_flow - thermo::suction_density(pressure) * compressor_flow) /
                  (p.suction_volume_m3 * thermo::density_pressure_gradient(pressure));
    }
    return dx;
  }
};

Eigen::VectorXd pack(const PlantState& s) {
  const auto n = s.air_temp.size();
  Eigen::VectorXd x(2 * n + 1);
  x << s.food_temp, s.air_temp, s.suction_pressure;
  return x;
}

PlantState unpack(const Eigen::VectorXd& x, Eigen::Index n) {
  return {x.head(n), x.segment(n, n), x(2 * n)};
}

Eigen::VectorXd rk4(const Derivative& f, const Eigen::VectorXd& x, double h) {
  const Eigen::VectorXd k1 = f(x);
  const Eigen::VectorXd k2 = f(x + 0.5 * h * k1);
  const Eigen::VectorXd k3 = f(x + 0.5 * h * k2);
  const Eigen::VectorXd k4 = f(x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

void check_state(const Eigen::VectorXd& x, Eigen::Index n, double time_s) {
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(x(i)))
      throw IntegrationError("T_food[" + std::to_string(i + 1) + "]", time_s, "is not finite");
    if (!std::isfinite(x(n + i)))
      throw IntegrationError("T_air[" + std::to_string(i + 1) + "]", time_s, "is not finite");
  }
  if (!std::isfinite(x(2 * n)) || x(2 * n) <= 0.0)
    throw IntegrationError("P_suc", time_s, "left the positive range (" + std::to_string(x(2 * n)) + " bar)");
}

}  // namespace

double suction_pressure_derivative(const PlantState& s, const BitVector& valves,
                                   const BitVector& compressors, const PlantParams& p) {
  const double pressure = s.suction_pressure;
  const double outflow = thermo::suction_density(pressure) * total_compressor_flow(compressors, p);
  return (total_valve_flow(valves, p) - outflow) /
         (p.suction_volume_m3 * thermo::density_pressure_gradient(pressure));
}

double total_power(const PlantState& s, const BitVector& compressors, const PlantParams& p) {
  return thermo::compressor_specific_power(s.suction_pressure) * total_compressor_flow(compressors, p);
}

PlantState step(const PlantState& s, const ControlInput& input, double h, const PlantParams& p,
                const Topology& topo, double time_s) {
  if (!(h > 0.0)) throw std::invalid_argument("integration step must be positive");
  const auto n = static_cast<Eigen::Index>(p.num_cases);
  if (s.air_temp.size() != n || s.food_temp.size() != n || input.valves.size() != p.num_cases ||
      input.compressors.size() != p.num_compressors)
    throw std::invalid_argument("state or input size does not match the plant parameters");
  const Eigen::VectorXd valves = to_vector(input.valves);
  const Derivative f{p, topo, valves, total_compressor_flow(input.compressors, p),
                     total_valve_flow(input.valves, p), std::nullopt};
  Eigen::VectorXd next;
  try {
    next = rk4(f, pack(s), h);
  } catch (const DomainError& e) {
    throw IntegrationError("P_suc", time_s, std::string("left the property range: ") + e.what());
  }
  check_state(next, n, time_s + h);
  return unpack(next, n);
}

PlantState step_thermal(const PlantState& s, const Eigen::VectorXd& valves, double evap_temp_c,
                        double h, const PlantParams& p, const Topology& topo) {
  const auto n = static_cast<Eigen::Index>(p.num_cases);
  const Derivative f{p, topo, valves, 0.0, 0.0, evap_temp_c};
  return unpack(rk4(f, pack(s), h), n);
}

void Trajectory::check_invariants() const {
  if (states.size() != time_s.size()) throw std::logic_error("trajectory: states/time length mismatch");
  if (controls.size() + 1 != states.size() && !(states.empty() && controls.empty()))
    throw std::logic_error("trajectory: controls must be one shorter than samples");
  if (power_w.size() != controls.size()) throw std::logic_error("trajectory: power/controls length mismatch");
  for (std::size_t k = 1; k < time_s.size(); ++k)
    if (!(time_s[k] > time_s[k - 1])) throw std::logic_error("trajectory: time grid not increasing");
}

const ControlInput& ControlSchedule::at(double t) const {
  if (inputs.empty()) throw std::invalid_argument("empty control schedule");
  auto k = static_cast<std::size_t>(std::floor(t / period_s + 1e-9));
  if (k >= inputs.size()) throw std::out_of_range("control schedule does not cover t=" + std::to_string(t));
  return inputs[k];
}

Trajectory simulate(const PlantState& initial, const ControlSchedule& schedule, double horizon_s,
                    const PlantParams& p, const Topology& topo, double h) {
  if (horizon_s < 0.0 || !(h > 0.0)) throw std::invalid_argument("horizon must be >= 0 and step > 0");
  if (horizon_s > 0.0 && schedule.period_s * static_cast<double>(schedule.inputs.size()) < horizon_s - 1e-9)
    throw std::invalid_argument("control schedule does not cover the horizon");
  Trajectory traj;
  traj.time_s.push_back(0.0);
  traj.states.push_back(initial);
  double t = 0.0;
  while (t < horizon_s - 1e-9) {
    const double dt = std::min(h, horizon_s - t);
    const auto& input = schedule.at(t);
    traj.power_w.push_back(total_power(traj.states.back(), input.compressors, p));
    traj.controls.push_back(input);
    traj.states.push_back(step(traj.states.back(), input, dt, p, topo, t));
    t += dt;
    traj.time_s.push_back(t);
  }
  return traj;
}

LinearModel build_linear_model(const PlantParams& p, const Topology& topo, double freeze_pressure_bar) {
  const double evap = thermo::evaporation_temperature(freeze_pressure_bar);
  const auto n = static_cast<Eigen::Index>(p.num_cases);
  using Triplet = Eigen::Triplet<double>;
  std::vector<Triplet> a;
  std::vector<Triplet> b;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const double food_cap = p.food_mass_kg[ui] * p.food_heat_capacity[ui];
    const double air_cap = p.air_mass_kg[ui] * p.air_heat_capacity[ui];
    a.emplace_back(i, i, -p.k_food_air / food_cap);
    a.emplace_back(i, n + i, p.k_food_air / food_cap);
    a.emplace_back(n + i, i, p.k_food_air / air_cap);
    a.emplace_back(n + i, n + i,
                   -(p.k_food_air + p.k_amb_air + p.k_air_evap + topo.row_sum(ui)) / air_cap);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double k = topo(ui, static_cast<std::size_t>(j));
      if (j != i && k != 0.0) a.emplace_back(n + i, n + j, k / air_cap);
    }
    b.emplace_back(n + i, i, p.k_air_evap * evap / air_cap);
    c(n + i) = p.k_amb_air * p.ambient_temp_c / air_cap;
  }
  LinearModel m;
  m.num_cases = p.num_cases;
  m.A.resize(2 * n, 2 * n);
  m.A.setFromTriplets(a.begin(), a.end());
  m.B.resize(2 * n, n);
  m.B.setFromTriplets(b.begin(), b.end());
  m.C = std::move(c);
  m.frozen_evap_temp_c = evap;
  return m;
}

Eigen::VectorXd stack_state(const PlantState& s) {
  Eigen::VectorXd x(2 * s.air_temp.size());
  x << s.food_temp, s.air_temp;
  return x;
}

Eigen::MatrixXd simulate_affine(const LinearModel& m, const Eigen::VectorXd& x0,
                                const Eigen::VectorXd& forcing, double h, std::size_t samples) {
  const auto dim = x0.size();
  Eigen::MatrixXd out(dim, static_cast<Eigen::Index>(samples));
  if (samples == 0) return out;
  out.col(0) = x0;
  Eigen::VectorXd x = x0, k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim);
  for (std::size_t k = 1; k < samples; ++k) {
    k1.noalias() = m.A * x;
    k1 += forcing;
    tmp = x + (0.5 * h) * k1;
    k2.noalias() = m.A * tmp;
    k2 += forcing;
    tmp = x + (0.5 * h) * k2;
    k3.noalias() = m.A * tmp;
    k3 += forcing;
    tmp = x + h * k3;
    k4.noalias() = m.A * tmp;
    k4 += forcing;
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    out.col(static_cast<Eigen::Index>(k)) = x;
  }
  return out;
}

Eigen::MatrixXd simulate_linear(const LinearModel& m, const Eigen::VectorXd& x0,
                                const Eigen::VectorXd& u, double h, std::size_t samples) {
  const Eigen::VectorXd forcing = m.B * u + m.C;
  return simulate_affine(m, x0, forcing, h, samples);
}

}  // namespace refctl::plant

namespace refctl::plant {

namespace {

std::string shortest(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ec == std::errc{} ? ptr : buf);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_cell(const std::string& cell, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc{} || ptr != cell.data() + cell.size())
    throw std::runtime_error("trajectory CSV line " + std::to_string(line) + ": bad number '" + cell + "'");
  return v;
}

}  // namespace

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, bool dense, double period_s) {
  traj.check_invariants();
  if (traj.states.empty()) throw std::invalid_argument("cannot export an empty trajectory");
  const std::size_t n = traj.states.front().num_cases();
  const std::size_t nc = traj.controls.empty() ? 0 : traj.controls.front().compressors.size();
  os << "time_s";
  for (std::size_t i = 1; i <= n; ++i) os << ",Tfood_" << i;
  for (std::size_t i = 1; i <= n; ++i) os << ",Tair_" << i;
  os << ",Psuc_bar";
  for (std::size_t i = 1; i <= n; ++i) os << ",u_" << i;
  for (std::size_t i = 1; i <= nc; ++i) os << ",uc_" << i;
  os << ",power_W\n";
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const bool last = k + 1 == traj.states.size();
    if (!dense && !last) {
      const double r = std::remainder(traj.time_s[k], period_s);
      if (std::abs(r) > 1e-9) continue;
    }
    const auto& s = traj.states[k];
    os << shortest(traj.time_s[k]);
    for (Eigen::Index i = 0; i < s.food_temp.size(); ++i) os << ',' << shortest(s.food_temp(i));
    for (Eigen::Index i = 0; i < s.air_temp.size(); ++i) os << ',' << shortest(s.air_temp(i));
    os << ',' << shortest(s.suction_pressure);
    if (last) {
      for (std::size_t i = 0; i < n + nc + 1; ++i) os << ',';
    } else {
      for (auto b : traj.controls[k].valves) os << ',' << int(b);
      for (auto b : traj.controls[k].compressors) os << ',' << int(b);
      os << ',' << shortest(traj.power_w[k]);
    }
    os << '\n';
  }
}

Trajectory read_trajectory_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("trajectory CSV is empty");
  const auto header = split_csv(line);
  std::size_t n = 0, nc = 0;
  for (const auto& h : header) {
    if (h.rfind("Tair_", 0) == 0) ++n;
    if (h.rfind("uc_", 0) == 0) ++nc;
  }
  const std::size_t width = 1 + 3 * n + 1 + nc + 1;
  if (header.size() != width || header.front() != "time_s" || header.back() != "power_W")
    throw std::runtime_error("trajectory CSV: unexpected header");
  Trajectory traj;
  std::size_t line_no = 1;
  bool closed = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (closed) throw std::runtime_error("trajectory CSV line " + std::to_string(line_no) + ": row after final sample");
    const auto cells = split_csv(line);
    if (cells.size() != width)
      throw std::runtime_error("trajectory CSV line " + std::to_string(line_no) + ": expected " +
                               std::to_string(width) + " fields");
    std::size_t c = 0;
    traj.time_s.push_back(parse_cell(cells[c++], line_no));
    PlantState s = PlantState::uniform(n, 0.0, 0.0);
    for (std::size_t i = 0; i < n; ++i) s.food_temp(static_cast<Eigen::Index>(i)) = parse_cell(cells[c++], line_no);
    for (std::size_t i = 0; i < n; ++i) s.air_temp(static_cast<Eigen::Index>(i)) = parse_cell(cells[c++], line_no);
    s.suction_pressure = parse_cell(cells[c++], line_no);
    traj.states.push_back(std::move(s));
    if (cells[c].empty()) {
      closed = true;
      continue;
    }
    ControlInput u{BitVector(n), BitVector(nc)};
    for (auto& b : u.valves) b = parse_cell(cells[c++], line_no) != 0.0;
    for (auto& b : u.compressors) b = parse_cell(cells[c++], line_no) != 0.0;
    traj.controls.push_back(std::move(u));
    traj.power_w.push_back(parse_cell(cells[c], line_no));
  }
  traj.check_invariants();
  return traj;
}

}  // namespace refctl::plant
