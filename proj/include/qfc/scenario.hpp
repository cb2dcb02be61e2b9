#pragma once

// Scenario configuration: a flat sectioned text format ([model], [simulation],
// [outputs]) with complex entries as [re, im] pairs, plus the batch runners
// that turn a config into records, trajectories, and an aggregate report.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qfc/csv.hpp"
#include "qfc/dynamics.hpp"
#include "qfc/filters.hpp"

namespace qfc {

struct TrackedObservable {
  std::string name;
  HermitianObservable op;
};

struct ScenarioConfig {
  SystemModel model;
  Scheme scheme;
  double dt;
  double t_max;
  std::size_t n_traj;
  std::uint64_t master_seed;
  std::vector<TrackedObservable> tracked;
  std::vector<std::string> outputs;

  SimConfig sim_config() const { return SimConfig{dt, t_max, master_seed, scheme}; }

  bool wants(const std::string& what) const {
    return std::find(outputs.begin(), outputs.end(), what) != outputs.end();
  }
};

namespace detail {

using json = nlohmann::json;

// Raw section/key table with the line each key was defined on.
struct RawConfig {
  std::map<std::string, std::string> values;  // "section.key" -> raw text
  std::map<std::string, int> lines;
};

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

inline RawConfig parse_sections(std::istream& in, const std::string& where) {
  RawConfig raw;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty()) throw ConfigError(where + ":" + std::to_string(lineno) +
                                             ": empty section name");
      continue;
    }
    std::size_t eq = t.find('=');
    if (eq == std::string::npos || section.empty())
      throw ConfigError(where + ":" + std::to_string(lineno) +
                        ": expected 'key = value' inside a section");
    std::string key = section + "." + trim(t.substr(0, eq));
    if (raw.values.count(key))
      throw ConfigError(where + ":" + std::to_string(lineno) + ": duplicate key " + key);
    raw.values[key] = trim(t.substr(eq + 1));
    raw.lines[key] = lineno;
  }
  return raw;
}

inline const std::string& require_key(const RawConfig& raw, const std::string& key,
                                      const std::string& where) {
  auto it = raw.values.find(key);
  if (it == raw.values.end()) throw ConfigError(where + ": missing field " + key);
  return it->second;
}

// Values are JSON fragments; a bare word (e.g. scheme = homodyne) is treated
// as a string token.
inline json parse_value(const std::string& text, const std::string& field) {
  json v = json::parse(text, nullptr, false);
  if (!v.is_discarded()) return v;
  if (text.find_first_of("[]{}\",") == std::string::npos) return json(text);
  throw ConfigError(field + ": malformed value '" + text + "'");
}

inline Mat parse_complex_matrix(const json& v, int dim, const std::string& field) {
  if (!v.is_array() || static_cast<int>(v.size()) != dim)
    throw ConfigError(field + ": expected " + std::to_string(dim) + " rows");
  Mat m(dim, dim);
  for (int i = 0; i < dim; ++i) {
    const json& row = v[i];
    if (!row.is_array() || static_cast<int>(row.size()) != dim)
      throw ConfigError(field + ": row " + std::to_string(i) + " must have " +
                        std::to_string(dim) + " entries");
    for (int j = 0; j < dim; ++j) {
      const json& e = row[j];
      if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
        throw ConfigError(field + ": entry (" + std::to_string(i) + "," +
                          std::to_string(j) + ") must be a [re, im] pair");
      m(i, j) = cplx(e[0].get<double>(), e[1].get<double>());
    }
  }
  return m;
}

inline json matrix_to_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      row.push_back(json::array({m(i, j).real(), m(i, j).imag()}));
    rows.push_back(row);
  }
  return rows;
}

inline std::optional<Mat> named_observable(const std::string& name) {
  if (name == "sigma_x") return pauli_x();
  if (name == "sigma_y") return pauli_y();
  if (name == "sigma_z") return pauli_z();
  return std::nullopt;
}

}  // namespace detail

inline ScenarioConfig load_scenario_text(std::istream& in, const std::string& where) {
  using detail::json;
  auto raw = detail::parse_sections(in, where);

  // --- [model] -------------------------------------------------------------
  json jdim = detail::parse_value(detail::require_key(raw, "model.dim", where), "dim");
  if (!jdim.is_number_integer() || jdim.get<int>() < 1)
    throw ConfigError("dim: must be a positive integer");
  int dim = jdim.get<int>();

  Mat H = detail::parse_complex_matrix(
      detail::parse_value(detail::require_key(raw, "model.H", where), "H"), dim, "H");
  Mat L = detail::parse_complex_matrix(
      detail::parse_value(detail::require_key(raw, "model.L", where), "L"), dim, "L");
  Mat rho0 = detail::parse_complex_matrix(
      detail::parse_value(detail::require_key(raw, "model.rho0", where), "rho0"), dim,
      "rho0");

  // Invariant gates, naming the first offending field.
  if (hermiticity_defect(H) > kHermTol)
    throw ConfigError("H hermiticity: defect " + std::to_string(hermiticity_defect(H)) +
                      " exceeds " + std::to_string(kHermTol));
  if (hermiticity_defect(rho0) > kHermTol)
    throw ConfigError("rho0 hermiticity: defect " +
                      std::to_string(hermiticity_defect(rho0)));
  double tr = rho0.trace().real();
  if (std::abs(tr - 1.0) > kTraceTol)
    throw ConfigError("rho0 trace: " + std::to_string(tr) + " (tolerance " +
                      std::to_string(kTraceTol) + ")");
  double lo = hermitian_eigenvalues(rho0).front();
  if (lo < -kEigTol)
    throw ConfigError("rho0 positivity: eigenvalue " + std::to_string(lo));

  SystemModel model(HermitianObservable(H), L, DensityMatrix(rho0));

  // --- [simulation] ----------------------------------------------------------
  json jscheme =
      detail::parse_value(detail::require_key(raw, "simulation.scheme", where), "scheme");
  if (!jscheme.is_string() ||
      (jscheme.get<std::string>() != "homodyne" && jscheme.get<std::string>() != "counting"))
    throw ConfigError("scheme: must be homodyne or counting");
  Scheme scheme =
      jscheme.get<std::string>() == "homodyne" ? Scheme::homodyne : Scheme::counting;

  auto get_number = [&](const std::string& key, const std::string& field) {
    json v = detail::parse_value(detail::require_key(raw, key, where), field);
    if (!v.is_number()) throw ConfigError(field + ": must be a number");
    return v.get<double>();
  };
  double dt = get_number("simulation.dt", "dt");
  double t_max = get_number("simulation.t_max", "t_max");

  json jn = detail::parse_value(detail::require_key(raw, "simulation.n_traj", where),
                                "n_traj");
  if (!jn.is_number_integer() || jn.get<long long>() < 1)
    throw ConfigError("n_traj: must be a positive integer");
  json jseed = detail::parse_value(
      detail::require_key(raw, "simulation.master_seed", where), "master_seed");
  if (!jseed.is_number_unsigned() && !jseed.is_number_integer())
    throw ConfigError("master_seed: must be an unsigned integer");

  ScenarioConfig cfg{std::move(model), scheme,
                     dt,               t_max,
                     jn.get<std::size_t>(), jseed.get<std::uint64_t>(),
                     {},               {}};
  cfg.sim_config().validate();

  // --- [outputs] --------------------------------------------------------------
  json jtracked =
      detail::parse_value(detail::require_key(raw, "outputs.tracked", where), "tracked");
  if (!jtracked.is_array()) throw ConfigError("tracked: must be a list");
  int custom_index = 0;
  for (const auto& entry : jtracked) {
    if (entry.is_string()) {
      std::string name = entry.get<std::string>();
      if (name == "identity") {
        cfg.tracked.push_back({name, HermitianObservable(identity(dim))});
      } else if (auto op = detail::named_observable(name)) {
        if (dim != 2) throw ConfigError("tracked: " + name + " requires dim 2");
        cfg.tracked.push_back({name, HermitianObservable(*op)});
      } else {
        throw ConfigError("tracked: unknown observable " + name);
      }
    } else if (entry.is_array()) {
      Mat x = detail::parse_complex_matrix(entry, dim, "tracked");
      if (hermiticity_defect(x) > kHermTol)
        throw ConfigError("tracked hermiticity: custom matrix defect " +
                          std::to_string(hermiticity_defect(x)));
      cfg.tracked.push_back(
          {"custom" + std::to_string(custom_index++), HermitianObservable(x)});
    } else {
      throw ConfigError("tracked: entries must be names or matrices");
    }
  }

  json jout =
      detail::parse_value(detail::require_key(raw, "outputs.outputs", where), "outputs");
  if (!jout.is_array()) throw ConfigError("outputs: must be a list");
  for (const auto& e : jout) {
    if (!e.is_string()) throw ConfigError("outputs: entries must be strings");
    std::string o = e.get<std::string>();
    if (o != "records" && o != "states" && o != "moments" && o != "innovations" &&
        o != "reports")
      throw ConfigError("outputs: unknown kind " + o);
    cfg.outputs.push_back(o);
  }
  return cfg;
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config: " + path);
  return load_scenario_text(in, path);
}

// Canonical textual form; load(serialize(cfg)) is field-by-field identical.
inline std::string serialize_scenario(const ScenarioConfig& cfg) {
  using detail::json;
  std::ostringstream out;
  out << "[model]\n";
  out << "dim = " << cfg.model.dim << "\n";
  out << "H = " << detail::matrix_to_json(cfg.model.H.mat()).dump() << "\n";
  out << "L = " << detail::matrix_to_json(cfg.model.L).dump() << "\n";
  out << "rho0 = " << detail::matrix_to_json(cfg.model.rho0.mat()).dump() << "\n";
  out << "\n[simulation]\n";
  out << "scheme = " << to_string(cfg.scheme) << "\n";
  out << "dt = " << detail::format_real(cfg.dt) << "\n";
  out << "t_max = " << detail::format_real(cfg.t_max) << "\n";
  out << "n_traj = " << cfg.n_traj << "\n";
  out << "master_seed = " << cfg.master_seed << "\n";
  out << "\n[outputs]\n";
  json jt = json::array();
  for (const auto& t : cfg.tracked) {
    if (t.name.rfind("custom", 0) == 0)
      jt.push_back(detail::matrix_to_json(t.op.mat()));
    else
      jt.push_back(t.name);
  }
  out << "tracked = " << jt.dump() << "\n";
  out << "outputs = " << json(cfg.outputs).dump() << "\n";
  return out.str();
}

inline void save_scenario(const ScenarioConfig& cfg, const std::string& path) {
  auto out = detail::open_out(path);
  out << serialize_scenario(cfg);
}

// FNV-1a over the canonical serialization; stable provenance tag for reports.
inline std::string config_hash(const ScenarioConfig& cfg) {
  std::string text = serialize_scenario(cfg);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// --- batch runners -----------------------------------------------------------

namespace detail {

inline std::string traj_file(const std::string& dir, const std::string& stem,
                             std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%06zu.csv", stem.c_str(), index);
  return (std::filesystem::path(dir) / buf).string();
}

inline void write_report(const std::string& dir, const ScenarioConfig& cfg,
                         json body, bool pass) {
  body["version"] = kVersion;
  body["config_hash"] = config_hash(cfg);
  body["master_seed"] = cfg.master_seed;
  body["scheme"] = to_string(cfg.scheme);
  body["n_traj"] = cfg.n_traj;
  body["pass"] = pass;
  auto out = open_out((std::filesystem::path(dir) / "report.json").string());
  out << body.dump(2) << "\n";
}

}  // namespace detail

// Generate n_traj truth trajectories and write the requested outputs.
// Returns 0; errors propagate as exceptions.
inline int scenario_simulate(const ScenarioConfig& cfg, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  SimConfig sim = cfg.sim_config();
  sim.validate();

  std::vector<std::string> names;
  for (const auto& t : cfg.tracked) names.push_back(t.name);

  for (std::size_t i = 0; i < cfg.n_traj; ++i) {
    SimConfig per = sim;
    Trajectory traj = simulate(cfg.model, per, derive_seed(cfg.master_seed, i));
    if (cfg.wants("records"))
      write_record_csv(detail::traj_file(out_dir, "record", i), traj.record);
    if (cfg.wants("states"))
      write_states_csv(detail::traj_file(out_dir, "states", i), traj.grid, traj.states);
    if (cfg.wants("moments") && !cfg.tracked.empty()) {
      std::vector<std::vector<double>> cols(cfg.tracked.size());
      for (std::size_t j = 0; j < cfg.tracked.size(); ++j) {
        cols[j].reserve(traj.states.size());
        for (const auto& s : traj.states)
          cols[j].push_back(expectation(s, cfg.tracked[j].op));
      }
      write_moments_csv(detail::traj_file(out_dir, "moments", i), traj.grid, names, cols);
    }
  }
  if (cfg.wants("reports")) {
    detail::json body;
    body["command"] = "simulate";
    detail::write_report(out_dir, cfg, std::move(body), true);
  }
  return 0;
}

struct EnsembleEntry {
  std::string observable;
  double mean_final = 0.0;
  double stderr_final = 0.0;
  double lindblad_final = 0.0;
  double deviation_sigmas = 0.0;
  bool pass = true;
};

// Run the filter over stored records and write the requested outputs plus an
// aggregate report with ensemble-vs-Lindblad deviations in sigma units.
inline int scenario_filter(const ScenarioConfig& cfg, const std::string& records_dir,
                           const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  std::vector<HermitianObservable> tracked;
  std::vector<std::string> names;
  for (const auto& t : cfg.tracked) {
    tracked.push_back(t.op);
    names.push_back(t.name);
  }

  std::vector<MeanVar> final_moment(cfg.tracked.size());
  std::size_t n_steps_seen = 0;
  for (std::size_t i = 0; i < cfg.n_traj; ++i) {
    auto rec = read_record_csv(detail::traj_file(records_dir, "record", i), cfg.scheme);
    auto ft = run_filter(cfg.model, rec, tracked);
    n_steps_seen = ft.innovations.size();
    if (cfg.wants("states"))
      write_states_csv(detail::traj_file(out_dir, "filter_states", i), ft.grid, ft.states);
    if (cfg.wants("moments") && !tracked.empty())
      write_moments_csv(detail::traj_file(out_dir, "filter_moments", i), ft.grid, names,
                        ft.moments);
    if (cfg.wants("innovations"))
      write_innovations_csv(detail::traj_file(out_dir, "innovations", i), ft.grid,
                            ft.innovations);
    for (std::size_t j = 0; j < tracked.size(); ++j)
      final_moment[j].add(ft.moments[j].back());
  }

  bool pass = true;
  detail::json entries = detail::json::array();
  if (!tracked.empty() && n_steps_seen > 0) {
    auto ref = lindblad_evolve(cfg.model, uniform_grid(cfg.dt, n_steps_seen));
    for (std::size_t j = 0; j < tracked.size(); ++j) {
      EnsembleEntry e;
      e.observable = names[j];
      e.mean_final = final_moment[j].mean;
      e.stderr_final = final_moment[j].stderr_mean();
      e.lindblad_final = expectation(ref.back(), tracked[j]);
      e.deviation_sigmas = e.stderr_final > 0.0
                               ? std::abs(e.mean_final - e.lindblad_final) / e.stderr_final
                               : 0.0;
      // Single-trajectory runs carry no ensemble information; skip the gate.
      e.pass = cfg.n_traj < 2 || e.deviation_sigmas <= 3.0;
      pass = pass && e.pass;
      entries.push_back({{"observable", e.observable},
                         {"mean_final", e.mean_final},
                         {"stderr_final", e.stderr_final},
                         {"lindblad_final", e.lindblad_final},
                         {"deviation_sigmas", e.deviation_sigmas},
                         {"pass", e.pass}});
    }
  }
  if (cfg.wants("reports")) {
    detail::json body;
    body["command"] = "filter";
    body["ensemble"] = std::move(entries);
    detail::write_report(out_dir, cfg, std::move(body), pass);
  }
  return pass ? 0 : 1;
}

// Full pipeline: truth simulation, then the filter over the emitted records.
inline int run_scenario(const ScenarioConfig& cfg, const std::string& out_dir) {
  ScenarioConfig sim_cfg = cfg;
  // The filter stage needs the records regardless of the requested outputs.
  if (!sim_cfg.wants("records")) sim_cfg.outputs.push_back("records");
  int rc = scenario_simulate(sim_cfg, out_dir);
  if (rc != 0) return rc;
  return scenario_filter(cfg, out_dir, out_dir);
}

}  // namespace qfc
