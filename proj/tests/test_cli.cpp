#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "refctl/cli.hpp"

using namespace refctl;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "refctl");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("refctl_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("missing config file is a configuration failure") {
    CHECK(invoke({"simulate", "--config", "/nonexistent.cfg", "--out", scratch("missing").string()}).code == 2);
  }

  TEST_CASE("invalid config names each violation") {
    const auto dir = scratch("invalid");
    fs::create_directories(dir);
    std::ofstream(dir / "bad.cfg") << "control_period_s = 0\nvolumetric_efficiency = 2\n";
    const auto r = invoke({"simulate", "--config", (dir / "bad.cfg").string(), "--out", dir.string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("control_period_s") != std::string::npos);
    CHECK(r.err.find("volumetric_efficiency") != std::string::npos);
  }

  TEST_CASE("simulate writes files and is deterministic without overwriting") {
    const auto dir = scratch("simulate");
    const std::vector<std::string> args{"simulate", "--controller", "pi", "--duration-s", "1200", "--out", dir.string()};
    CHECK(invoke(args).code == 0);
    CHECK(fs::exists(dir / "pi" / "trajectory.csv"));
    CHECK(invoke(args).code == 0);
    REQUIRE(fs::exists(dir / "pi" / "metrics-1.json"));
    CHECK(slurp(dir / "pi" / "metrics.json") == slurp(dir / "pi" / "metrics-1.json"));
    auto refuse = args;
    refuse.insert(refuse.end(), {"--on-exists", "refuse"});
    CHECK(invoke(refuse).code == 1);
  }

  TEST_CASE("compare reports savings for both proposed controllers") {
    const auto dir = scratch("compare");
    CHECK(invoke({"compare", "--duration-s", "1800", "--out", dir.string()}).code == 0);
    const auto j = nlohmann::json::parse(slurp(dir / "comparison.json"));
    CHECK(j["linear"].contains("energy_saving_pct"));
    CHECK(j["greedy"].contains("switching_reduction_pct"));
  }

  TEST_CASE("dr with a zero-price file and with a malformed file") {
    const auto dir = scratch("dr");
    fs::create_directories(dir);
    std::ofstream(dir / "zero.csv") << "time_s,price_usd_per_kwh\n0,0\n";
    std::ofstream(dir / "bad.csv") << "time_s,price_usd_per_kwh\n0,0.1\n60;0.2\n";
    CHECK(invoke({"dr", "--prices", (dir / "zero.csv").string(), "--duration-s", "600", "--out", dir.string()}).code == 0);
    const auto j = nlohmann::json::parse(slurp(dir / "dr" / "costs.json"));
    CHECK(j["pi"]["cost_usd"] == 0.0);
    CHECK(j["linear"]["cost_usd"] == 0.0);
    CHECK(j["cap_invariant_holds"] == true);
    const auto bad = invoke({"dr", "--prices", (dir / "bad.csv").string(), "--out", dir.string()});
    CHECK(bad.code == 2);
    CHECK(bad.err.find("line 3") != std::string::npos);
  }

  TEST_CASE("verify exit codes") {
    const auto dir = scratch("verify");
    const auto ok = invoke({"verify", "--suite", "gradient", "--out", dir.string()});
    CHECK(ok.code == 0);
    CHECK(ok.out.find("adjoint_gradient") != std::string::npos);
    const auto fault = invoke({"verify", "--suite", "monotone", "--fault-flip-b", "--out", dir.string()});
    CHECK(fault.code == 3);
    CHECK(invoke({"verify", "--suite", "nonsense", "--out", dir.string()}).code == 2);
  }

  TEST_CASE("export-defaults and usage errors") {
    const auto dir = scratch("export");
    CHECK(invoke({"export-defaults", "--out", dir.string()}).code == 0);
    CHECK(slurp(dir / "defaults.cfg").find("k_food_air = 300") != std::string::npos);
    CHECK(invoke({}).code == 2);
    CHECK(invoke({"simulate", "--bogus"}).code == 2);
  }
}
