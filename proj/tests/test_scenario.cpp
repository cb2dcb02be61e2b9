#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "qfc/scenario.hpp"

using namespace qfc;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"(# decaying qubit
[model]
dim = 2
H = [[[0,0],[0,0]],[[0,0],[0,0]]]
L = [[[0,0],[0,0]],[[1,0],[0,0]]]
rho0 = [[[1,0],[0,0]],[[0,0],[0,0]]]

[simulation]
scheme = homodyne
dt = 0.001
t_max = 0.1
n_traj = 1
master_seed = 42

[outputs]
tracked = ["sigma_z"]
outputs = ["records", "states", "moments", "innovations", "reports"]
)";

ScenarioConfig load_from_string(const std::string& text) {
  std::istringstream in(text);
  return load_scenario_text(in, "<memory>");
}

std::string replace_once(std::string text, const std::string& from, const std::string& to) {
  auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  return text.replace(pos, from.size(), to);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& stem)
      : path(fs::temp_directory_path() / ("qfc_test_" + stem)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("load_scenario") {
  SECTION("minimal valid qubit scenario loads") {
    auto cfg = load_from_string(kMinimal);
    CHECK(cfg.model.dim == 2);
    CHECK(cfg.scheme == Scheme::homodyne);
    CHECK(cfg.dt == 0.001);
    CHECK(cfg.n_traj == 1);
    CHECK(cfg.master_seed == 42);
    REQUIRE(cfg.tracked.size() == 1);
    CHECK(cfg.tracked[0].name == "sigma_z");
    CHECK(cfg.wants("records"));
    CHECK((cfg.model.L - sigma_minus()).cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("rho0 with trace 0.9 is rejected naming the field") {
    std::string bad = replace_once(kMinimal, "rho0 = [[[1,0],[0,0]],[[0,0],[0,0]]]",
                                   "rho0 = [[[0.9,0],[0,0]],[[0,0],[0,0]]]");
    try {
      load_from_string(bad);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("rho0 trace") != std::string::npos);
    }
  }

  SECTION("non-Hermitian H is rejected naming the field") {
    std::string bad = replace_once(kMinimal, "H = [[[0,0],[0,0]],[[0,0],[0,0]]]",
                                   "H = [[[0,0],[0.001,0]],[[0,0],[0,0]]]");
    try {
      load_from_string(bad);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("H hermiticity") != std::string::npos);
    }
  }

  SECTION("missing field and malformed value diagnostics") {
    CHECK_THROWS_AS(load_from_string(replace_once(kMinimal, "dt = 0.001\n", "")),
                    ConfigError);
    CHECK_THROWS_AS(
        load_from_string(replace_once(kMinimal, "dt = 0.001", "dt = [0.001")),
        ConfigError);
    CHECK_THROWS_AS(
        load_from_string(replace_once(kMinimal, "scheme = homodyne", "scheme = fancy")),
        ConfigError);
  }
}

TEST_CASE("scenario round trip") {
  auto cfg = load_from_string(kMinimal);
  std::string text = serialize_scenario(cfg);
  auto again = load_from_string(text);

  CHECK(again.model.dim == cfg.model.dim);
  CHECK((again.model.H.mat() - cfg.model.H.mat()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((again.model.L - cfg.model.L).cwiseAbs().maxCoeff() == 0.0);
  CHECK((again.model.rho0.mat() - cfg.model.rho0.mat()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(again.scheme == cfg.scheme);
  CHECK(again.dt == cfg.dt);
  CHECK(again.t_max == cfg.t_max);
  CHECK(again.n_traj == cfg.n_traj);
  CHECK(again.master_seed == cfg.master_seed);
  CHECK(again.outputs == cfg.outputs);
  REQUIRE(again.tracked.size() == cfg.tracked.size());
  CHECK(again.tracked[0].name == cfg.tracked[0].name);

  CHECK(config_hash(again) == config_hash(cfg));
  CHECK(serialize_scenario(again) == text);
}

TEST_CASE("run_scenario") {
  auto cfg = load_from_string(kMinimal);

  SECTION("single homodyne trajectory emits the full file set") {
    TempDir dir("single");
    int rc = run_scenario(cfg, dir.path.string());
    CHECK(rc == 0);
    CHECK(fs::exists(dir.path / "record_000000.csv"));
    CHECK(fs::exists(dir.path / "states_000000.csv"));
    CHECK(fs::exists(dir.path / "moments_000000.csv"));
    CHECK(fs::exists(dir.path / "filter_states_000000.csv"));
    CHECK(fs::exists(dir.path / "filter_moments_000000.csv"));
    CHECK(fs::exists(dir.path / "innovations_000000.csv"));
    CHECK(fs::exists(dir.path / "report.json"));
  }

  SECTION("filter outputs reproduce the truth states through the CSV layer") {
    TempDir dir("consistency");
    run_scenario(cfg, dir.path.string());
    CHECK(slurp(dir.path / "filter_states_000000.csv") ==
          slurp(dir.path / "states_000000.csv"));
  }

  SECTION("identical config twice gives byte-identical outputs") {
    TempDir a("rerun_a"), b("rerun_b");
    run_scenario(cfg, a.path.string());
    run_scenario(cfg, b.path.string());
    for (const auto& entry : fs::directory_iterator(a.path)) {
      auto name = entry.path().filename();
      INFO(name);
      CHECK(slurp(entry.path()) == slurp(b.path / name));
    }
  }

  SECTION("record CSV round-trips bit-exactly") {
    TempDir dir("roundtrip");
    auto traj = simulate(cfg.model, cfg.sim_config(), derive_seed(cfg.master_seed, 0));
    auto path = (dir.path / "rec.csv").string();
    write_record_csv(path, traj.record);
    auto rec = read_record_csv(path, cfg.scheme);
    CHECK(rec.increments == traj.record.increments);
    CHECK(rec.grid.size() == traj.record.grid.size());
  }
}
