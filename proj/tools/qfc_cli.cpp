// Command-line front end: scenario simulation, filtering over stored records,
// verification suites, and report summarization.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "qfc/scenario.hpp"
#include "qfc/verify.hpp"

namespace {

constexpr const char* kOutputRootEnv = "QFC_OUTPUT_ROOT";

std::string output_root() {
  const char* env = std::getenv(kOutputRootEnv);
  return env && *env ? env : ".";
}

std::string default_out_dir() {
  return (std::filesystem::path(output_root()) / "qfc_out").string();
}

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> dt;
  std::optional<double> tmax;
  std::optional<std::size_t> ntraj;

  void apply(qfc::ScenarioConfig& cfg) const {
    if (seed) cfg.master_seed = *seed;
    if (dt) cfg.dt = *dt;
    if (tmax) cfg.t_max = *tmax;
    if (ntraj) cfg.n_traj = *ntraj;
    cfg.sim_config().validate();
  }
};

void add_overrides(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--seed", ov.seed, "Override master_seed");
  cmd->add_option("--dt", ov.dt, "Override time step");
  cmd->add_option("--tmax", ov.tmax, "Override horizon");
  cmd->add_option("--ntraj", ov.ntraj, "Override trajectory count");
}

int run_verify(const std::string& suite) {
  auto results = qfc::verify_suite(suite);
  bool all_pass = true;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& r : results) {
    all_pass = all_pass && r.pass;
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << " — " << r.detail << "\n";
    entries.push_back({{"name", r.name}, {"pass", r.pass}, {"detail", r.detail}});
  }
  nlohmann::json report{{"version", qfc::kVersion},
                        {"suite", suite},
                        {"pass", all_pass},
                        {"checks", entries}};
  std::filesystem::create_directories(output_root());
  std::string path =
      (std::filesystem::path(output_root()) / ("verify_" + suite + ".json")).string();
  auto out = qfc::detail::open_out(path);
  out << report.dump(2) << "\n";
  std::cout << (all_pass ? "VERIFY PASS" : "VERIFY FAIL") << " (" << results.size()
            << " checks, report: " << path << ")\n";
  return all_pass ? 0 : 1;
}

int run_report(const std::string& dir) {
  std::string path = (std::filesystem::path(dir) / "report.json").string();
  auto in = qfc::detail::open_in(path);
  nlohmann::json report = nlohmann::json::parse(in, nullptr, false);
  if (report.is_discarded()) throw qfc::IoError("malformed report: " + path);
  std::cout << "report: " << path << "\n";
  std::cout << "  version:     " << report.value("version", std::string("?")) << "\n";
  std::cout << "  config_hash: " << report.value("config_hash", std::string("?")) << "\n";
  std::cout << "  master_seed: " << report.value("master_seed", 0ull) << "\n";
  std::cout << "  scheme:      " << report.value("scheme", std::string("?")) << "\n";
  std::cout << "  n_traj:      " << report.value("n_traj", 0ull) << "\n";
  if (report.contains("ensemble"))
    for (const auto& e : report["ensemble"])
      std::cout << "  " << e.value("observable", std::string("?")) << ": mean "
                << e.value("mean_final", 0.0) << ", lindblad "
                << e.value("lindblad_final", 0.0) << ", deviation "
                << e.value("deviation_sigmas", 0.0) << " sigma ("
                << (e.value("pass", false) ? "pass" : "FAIL") << ")\n";
  bool pass = report.value("pass", false);
  std::cout << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional quantum dynamics: simulation, filtering, verification"};
  app.require_subcommand(1);

  std::string config_path, out_dir = default_out_dir(), records_dir, suite, report_dir;
  Overrides ov_sim, ov_filt;

  auto* sim = app.add_subcommand("simulate", "Generate truth trajectories and records");
  sim->add_option("config", config_path, "Scenario config file")->required();
  sim->add_option("--out", out_dir, "Output directory");
  add_overrides(sim, ov_sim);

  auto* filt = app.add_subcommand("filter", "Run the filter over stored records");
  filt->add_option("config", config_path, "Scenario config file")->required();
  filt->add_option("--records", records_dir, "Directory holding record_*.csv")->required();
  filt->add_option("--out", out_dir, "Output directory");
  add_overrides(filt, ov_filt);

  auto* ver = app.add_subcommand("verify", "Run a named verification suite");
  ver->add_option("suite", suite,
                  "covariance|markov|moments|duality|oracle|ensemble|all")
      ->required();

  auto* rep = app.add_subcommand("report", "Summarize a report.json in a directory");
  rep->add_option("dir", report_dir, "Directory holding report.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) {
      qfc::ScenarioConfig cfg = qfc::load_scenario(config_path);
      ov_sim.apply(cfg);
      return qfc::scenario_simulate(cfg, out_dir);
    }
    if (filt->parsed()) {
      qfc::ScenarioConfig cfg = qfc::load_scenario(config_path);
      ov_filt.apply(cfg);
      return qfc::scenario_filter(cfg, records_dir, out_dir);
    }
    if (ver->parsed()) return run_verify(suite);
    if (rep->parsed()) return run_report(report_dir);
  } catch (const qfc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const qfc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
