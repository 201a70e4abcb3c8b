#include "refctl/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "refctl/config.hpp"
#include "refctl/errors.hpp"
#include "refctl/oracle.hpp"
#include "refctl/scenario.hpp"

namespace refctl::cli {

namespace fs = std::filesystem;

namespace {

enum class Verbosity { quiet, info, debug };

Verbosity verbosity_from_env() {
  const char* v = std::getenv("REFCTL_LOG");
  if (!v) return Verbosity::info;
  const std::string s(v);
  if (s == "quiet" || s == "0") return Verbosity::quiet;
  if (s == "debug" || s == "2") return Verbosity::debug;
  return Verbosity::info;
}

enum class OnExists { suffix, refuse, overwrite };

struct Options {
  std::string config_path;
  std::string controller;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  std::optional<double> duration_s;
  std::string prices_path;
  std::string suite = "all";
  OnExists on_exists = OnExists::suffix;
  bool dense = false;
  bool flip_b = false;
};

class Session {
 public:
  Session(const Options& o, std::ostream& out, std::ostream& err)
      : o_(o), out_(out), err_(err), verbosity_(verbosity_from_env()) {}

  void info(const std::string& msg) const {
    if (verbosity_ != Verbosity::quiet) err_ << msg << '\n';
  }
  void debug(const std::string& msg) const {
    if (verbosity_ == Verbosity::debug) err_ << msg << '\n';
  }

  Config config() const {
    Config c = o_.config_path.empty() ? default_config() : load_config(o_.config_path);
    if (o_.seed) c.scenario.seed = *o_.seed;
    if (o_.duration_s) c.scenario.duration_s = *o_.duration_s;
    c.validate();
    return c;
  }

  // Every file lands under the output directory; existing files are never
  // replaced unless the policy says so.
  fs::path claim(const fs::path& relative) const {
    const fs::path target = fs::path(o_.out_dir) / relative;
    fs::create_directories(target.parent_path());
    if (!fs::exists(target) || o_.on_exists == OnExists::overwrite) return target;
    if (o_.on_exists == OnExists::refuse)
      throw std::runtime_error("refusing to overwrite '" + target.string() + "' (see --on-exists)");
    for (int k = 1;; ++k) {
      fs::path candidate = target.parent_path() / (target.stem().string() + "-" + std::to_string(k) +
                                                   target.extension().string());
      if (!fs::exists(candidate)) return candidate;
    }
  }

  void write(const fs::path& relative, const std::string& content) const {
    const auto path = claim(relative);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
    f << content;
    info("wrote " + path.string());
  }

  scenario::RunResult run_and_save(const Config& c, ControllerKind kind, const scenario::PriceSeries* prices,
                                   const std::string& subdir) const {
    const auto start = std::chrono::steady_clock::now();
    auto run = scenario::run_closed_loop(c, kind, prices);
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    debug(std::string(to_string(kind)) + " run took " + std::to_string(elapsed.count()) + " s");
    const fs::path dir(subdir);
    std::ostringstream traj;
    plant::write_trajectory_csv(traj, run.trajectory, o_.dense, c.params.control_period_s);
    write(dir / "trajectory.csv", traj.str());
    write(dir / "metrics.json", scenario::metrics_json(run, c));
    if (!run.diagnostics.empty()) {
      std::ostringstream diag;
      opt::write_diagnostics_csv(diag, run.diagnostics);
      write(dir / "diagnostics.csv", diag.str());
    }
    return run;
  }

  const Options& options() const { return o_; }
  std::ostream& out() const { return out_; }

 private:
  const Options& o_;
  std::ostream& out_;
  std::ostream& err_;
  Verbosity verbosity_;
};

double percent_less(double proposed, double baseline) {
  return baseline == 0.0 ? 0.0 : 100.0 * (1.0 - proposed / baseline);
}

int cmd_simulate(const Session& s) {
  const auto c = s.config();
  ControllerKind kind = c.controller.variant;
  if (!s.options().controller.empty()) {
    auto parsed = parse_controller(s.options().controller);
    if (!parsed) throw ConfigError({"unknown controller '" + s.options().controller + "'"});
    kind = *parsed;
  }
  const auto run = s.run_and_save(c, kind, nullptr, std::string(to_string(kind)));
  s.out() << to_string(kind) << ": " << run.metrics.average_power_kw << " kW, " << run.metrics.switchings
          << " switchings\n";
  return kOk;
}

int cmd_compare(const Session& s) {
  const auto c = s.config();
  const auto pi = s.run_and_save(c, ControllerKind::pi, nullptr, "pi");
  nlohmann::ordered_json j;
  j["seed"] = c.scenario.seed;
  j["duration_s"] = c.scenario.duration_s;
  j["pi"] = {{"average_power_kw", pi.metrics.average_power_kw}, {"switchings", pi.metrics.switchings}};
  for (auto kind : {ControllerKind::linear, ControllerKind::greedy}) {
    const auto r = s.run_and_save(c, kind, nullptr, std::string(to_string(kind)));
    const double saving = percent_less(r.metrics.average_power_kw, pi.metrics.average_power_kw);
    const double reduction = percent_less(static_cast<double>(r.metrics.switchings),
                                          static_cast<double>(pi.metrics.switchings));
    j[std::string(to_string(kind))] = {{"average_power_kw", r.metrics.average_power_kw},
                                       {"switchings", r.metrics.switchings},
                                       {"energy_saving_pct", saving},
                                       {"switching_reduction_pct", reduction}};
    s.out() << to_string(kind) << ": saving " << saving << "%, switching reduction " << reduction << "%\n";
  }
  s.write("comparison.json", j.dump(2) + "\n");
  return kOk;
}

int cmd_dr(const Session& s) {
  const auto c = s.config();
  const auto prices = s.options().prices_path.empty() ? scenario::synthetic_spike_prices()
                                                      : scenario::load_price_csv(s.options().prices_path);
  if (s.options().prices_path.empty()) s.info("no --prices given; using the synthetic spike series");
  const auto pi = s.run_and_save(c, ControllerKind::pi, &prices, "dr/pi");
  nlohmann::ordered_json j;
  j["seed"] = c.scenario.seed;
  j["price_threshold"] = c.scenario.dr_price_threshold;
  j["cap_fraction"] = c.scenario.dr_cap_fraction;
  j["pi"] = {{"cost_usd", pi.metrics.cost_usd}, {"energy_kwh", pi.metrics.energy_kwh}};
  bool caps_ok = true;
  for (auto kind : {ControllerKind::linear, ControllerKind::greedy}) {
    const auto r = s.run_and_save(c, kind, &prices, "dr/" + std::string(to_string(kind)));
    const auto capped = std::count_if(r.periods.begin(), r.periods.end(),
                                      [&](const auto& p) { return p.valve_cap < c.params.num_cases; });
    caps_ok = caps_ok && r.cap_violations() == 0;
    j[std::string(to_string(kind))] = {{"cost_usd", r.metrics.cost_usd},
                                       {"energy_kwh", r.metrics.energy_kwh},
                                       {"cost_saving_pct", percent_less(r.metrics.cost_usd, pi.metrics.cost_usd)},
                                       {"capped_periods", capped},
                                       {"cap_violations", r.cap_violations()},
                                       {"max_excursion_c", r.metrics.max_excursion_c},
                                       {"max_air_excursion_c", r.metrics.max_air_excursion_c}};
    s.out() << to_string(kind) << ": cost $" << r.metrics.cost_usd << " vs PI $" << pi.metrics.cost_usd
            << ", cap violations " << r.cap_violations() << "\n";
  }
  j["cap_invariant_holds"] = caps_ok;
  s.write("dr/costs.json", j.dump(2) + "\n");
  return caps_ok ? kOk : kViolation;
}

int cmd_verify(const Session& s) {
  static const std::map<std::string, oracle::Suite> suites{{"theorems", oracle::Suite::theorems},
                                                           {"gradient", oracle::Suite::gradient},
                                                           {"oracle", oracle::Suite::oracle},
                                                           {"monotone", oracle::Suite::monotone},
                                                           {"all", oracle::Suite::all}};
  const auto it = suites.find(s.options().suite);
  if (it == suites.end()) throw ConfigError({"unknown suite '" + s.options().suite + "'"});
  oracle::SuiteOptions o;
  if (s.options().seed) o.seed = *s.options().seed;
  o.monotone.seed = o.seed;
  o.monotone.flip_input_sign = s.options().flip_b;
  const auto reports = oracle::run_suite(it->second, o);
  bool ok = true;
  for (const auto& r : reports) {
    ok = ok && r.passed();
    s.out() << (r.passed() ? "PASS " : "FAIL ") << r.property << " (" << r.instances << " instances, "
            << r.violations.size() << " violations)";
    for (const auto& [k, v] : r.metrics) s.out() << ' ' << k << '=' << v;
    s.out() << '\n';
    for (std::size_t k = 0; k < std::min<std::size_t>(r.violations.size(), 5); ++k)
      s.out() << "  " << r.violations[k].witness << " (margin " << r.violations[k].margin << ")\n";
  }
  s.write("verify/" + s.options().suite + ".json", oracle::to_json(reports) + "\n");
  return ok ? kOk : kViolation;
}

int cmd_export_defaults(const Session& s) {
  s.write("defaults.cfg", format_config(default_config()));
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Closed-loop simulation and verification of display-case refrigeration controllers"};
  app.require_subcommand(1, 1);
  std::string on_exists = "suffix";
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "configuration file (defaults when absent)");
    sub->add_option("--seed", o.seed, "overrides the perturbation seed");
    sub->add_option("--out", o.out_dir, "output directory")->capture_default_str();
    sub->add_option("--on-exists", on_exists, "suffix, refuse or overwrite")
        ->check(CLI::IsMember({"suffix", "refuse", "overwrite"}))
        ->capture_default_str();
  };
  auto* simulate = app.add_subcommand("simulate", "run one controller and write its trajectory and metrics");
  common(simulate);
  simulate->add_option("--controller", o.controller, "pi, linear, greedy or oracle");
  simulate->add_option("--duration-s", o.duration_s, "simulated time");
  simulate->add_flag("--dense", o.dense, "write every integrator step to the trajectory CSV");
  auto* compare = app.add_subcommand("compare", "PI against both optimizing controllers on the same plant");
  common(compare);
  compare->add_option("--duration-s", o.duration_s, "simulated time");
  compare->add_flag("--dense", o.dense, "write every integrator step to the trajectory CSV");
  auto* dr = app.add_subcommand("dr", "demand-response cost comparison under a price series");
  common(dr);
  dr->add_option("--prices", o.prices_path, "price CSV (time_s,price_usd_per_kwh)");
  dr->add_option("--duration-s", o.duration_s, "simulated time");
  dr->add_flag("--dense", o.dense, "write every integrator step to the trajectory CSV");
  auto* verify = app.add_subcommand("verify", "property suites against exhaustive enumeration");
  common(verify);
  verify->add_option("--suite", o.suite, "theorems, gradient, oracle, monotone or all")->capture_default_str();
  verify->add_flag("--fault-flip-b", o.flip_b, "negate the valve input gain (fault injection)");
  auto* export_defaults = app.add_subcommand("export-defaults", "write the reference configuration");
  common(export_defaults);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kConfig;
  }
  o.on_exists = on_exists == "refuse" ? OnExists::refuse
                : on_exists == "overwrite" ? OnExists::overwrite
                                           : OnExists::suffix;

  Session session(o, out, err);
  try {
    if (simulate->parsed()) return cmd_simulate(session);
    if (compare->parsed()) return cmd_compare(session);
    if (dr->parsed()) return cmd_dr(session);
    if (verify->parsed()) return cmd_verify(session);
    if (export_defaults->parsed()) return cmd_export_defaults(session);
  } catch (const ConfigError& e) {
    err << "configuration error:\n";
    for (const auto& v : e.violations()) err << "  " << v << '\n';
    return kConfig;
  } catch (const IntegrationError& e) {
    err << "runtime error at t=" << e.time_s() << " s: " << e.what() << '\n';
    return kRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kRuntime;
}

}  // namespace refctl::cli
