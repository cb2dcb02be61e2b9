#pragma once

// Observation records and trajectory containers shared by the truth
// simulators and the filters.

#include <cmath>
#include <string>
#include <vector>

#include "qfc/algebra.hpp"

namespace qfc {

enum class Scheme { homodyne, counting };

inline std::string to_string(Scheme s) {
  return s == Scheme::homodyne ? "homodyne" : "counting";
}

struct SimConfig {
  double dt;
  double t_max;
  std::uint64_t seed;
  Scheme scheme;

  std::size_t n_steps() const { return static_cast<std::size_t>(std::llround(t_max / dt)); }

  void validate() const {
    if (dt <= 0.0 || t_max <= 0.0) throw ConfigError("SimConfig: dt and t_max must be > 0");
    if (dt > 0.01) throw ConfigError("SimConfig: dt > 0.01 violates the stability guard");
    if (t_max / dt > 1e7) throw ConfigError("SimConfig: t_max/dt exceeds 1e7");
  }
};

struct MeasurementRecord {
  std::vector<double> grid;        // n_steps + 1 uniform points, grid[0] = 0
  std::vector<double> increments;  // one per step; counting increments in {0,1}
  Scheme scheme;

  double dt() const { return grid.size() > 1 ? grid[1] - grid[0] : 0.0; }
  std::size_t n_steps() const { return increments.size(); }

  void validate() const {
    if (grid.size() != increments.size() + 1 || grid.size() < 2)
      throw ConfigError("MeasurementRecord: grid/increment lengths inconsistent");
    double d = dt();
    for (std::size_t k = 1; k < grid.size(); ++k)
      if (std::abs((grid[k] - grid[k - 1]) - d) > 1e-12)
        throw ConfigError("MeasurementRecord: grid spacing not uniform");
    if (scheme == Scheme::counting)
      for (double v : increments)
        if (v != 0.0 && v != 1.0)
          throw ConfigError("MeasurementRecord: counting increment not in {0,1}");
  }
};

inline std::vector<double> uniform_grid(double dt, std::size_t n_steps) {
  std::vector<double> g(n_steps + 1);
  for (std::size_t k = 0; k <= n_steps; ++k) g[k] = dt * static_cast<double>(k);
  return g;
}

struct Trajectory {
  std::vector<double> grid;
  std::vector<DensityMatrix> states;  // one per grid point
  MeasurementRecord record;
};

struct FilterTrajectory {
  std::vector<double> grid;
  std::vector<DensityMatrix> states;
  std::vector<std::vector<double>> moments;  // [tracked observable][grid point]
  std::vector<double> innovations;           // one per step
  Scheme scheme;
};

}  // namespace qfc
