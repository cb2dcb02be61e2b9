#pragma once

// Truth simulation: conditional-state trajectories and measurement records for
// the diffusive and counting schemes, plus the unconditional Lindblad
// reference solution. The conditional simulators share the filter stepping
// kernel, so a filter driven by a truth record reproduces the truth states.

#include <random>
#include <vector>

#include "qfc/filters.hpp"

namespace qfc {

// Classical RK4 on d(rho)/dt = Ldag(rho).
inline std::vector<DensityMatrix> lindblad_evolve(const SystemModel& m,
                                                  const std::vector<double>& grid) {
  if (grid.size() < 1) throw ConfigError("lindblad_evolve: empty grid");
  std::vector<DensityMatrix> out;
  out.reserve(grid.size());
  Mat rho = m.rho0.mat();
  out.push_back(m.rho0);
  for (std::size_t k = 1; k < grid.size(); ++k) {
    double h = grid[k] - grid[k - 1];
    if (h <= 0.0) throw ConfigError("lindblad_evolve: grid not increasing");
    Mat k1 = adjoint_generator(m, rho);
    Mat k2 = adjoint_generator(m, Mat(rho + 0.5 * h * k1));
    Mat k3 = adjoint_generator(m, Mat(rho + 0.5 * h * k2));
    Mat k4 = adjoint_generator(m, Mat(rho + h * k3));
    rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    out.push_back(repair_state(rho, 1e-6));
  }
  return out;
}

namespace detail {

// Streams one conditional trajectory, calling
// on_step(step_index, record_increment, rho_after_hygiene).
template <class MatT, class F>
void simulate_stream(const SystemModel& m, const SimConfig& cfg, std::uint64_t seed,
                     F&& on_step) {
  cfg.validate();
  auto kernel = ModelKernel<MatT>::from(m);
  MatT rho = kernel.initial_state(m);
  const double dt = cfg.dt;
  const std::size_t n = cfg.n_steps();
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(dt));
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  for (std::size_t k = 0; k < n; ++k) {
    double dy;
    if (cfg.scheme == Scheme::homodyne) {
      double mean = kernel.homodyne_rate(rho);
      dy = mean * dt + normal(eng);
      rho = kernel.homodyne_update(rho, dy, dt);
    } else {
      double rate = kernel.counting_rate(rho);
      double p = rate * dt;
      if (p > 0.1)
        throw StepTooCoarseError("jump probability " + std::to_string(p) +
                                 " exceeds 0.1 at step " + std::to_string(k));
      dy = (unif(eng) < p) ? 1.0 : 0.0;
      double rate_unused;
      rho = kernel.counting_update(rho, dy, dt, rate_unused);
    }
    try {
      step_hygiene(rho);
    } catch (const Error& e) {
      throw PositivityViolationError(
          "simulate step " + std::to_string(k) + ": " + e.what(), 0.0);
    }
    on_step(k, dy, rho);
  }
}

}  // namespace detail

template <class F>
void simulate_stream(const SystemModel& m, const SimConfig& cfg, std::uint64_t seed,
                     F&& on_step) {
  detail::dispatch_dim(m, [&](auto* tag) {
    using MatT = std::remove_pointer_t<decltype(tag)>;
    detail::simulate_stream<MatT>(m, cfg, seed, on_step);
  });
}

inline Trajectory simulate(const SystemModel& m, const SimConfig& cfg, std::uint64_t seed) {
  Trajectory traj;
  traj.grid = uniform_grid(cfg.dt, cfg.n_steps());
  traj.record.grid = traj.grid;
  traj.record.scheme = cfg.scheme;
  traj.record.increments.reserve(cfg.n_steps());
  traj.states.reserve(traj.grid.size());
  traj.states.push_back(m.rho0);
  simulate_stream(m, cfg, seed, [&](std::size_t, double dy, const auto& rho) {
    traj.record.increments.push_back(dy);
    traj.states.push_back(repair_state(Mat(rho), kStepRepairTol));
  });
  return traj;
}

inline Trajectory simulate_homodyne(const SystemModel& m, SimConfig cfg,
                                    std::uint64_t seed) {
  cfg.scheme = Scheme::homodyne;
  return simulate(m, cfg, seed);
}

inline Trajectory simulate_counting(const SystemModel& m, SimConfig cfg,
                                    std::uint64_t seed) {
  cfg.scheme = Scheme::counting;
  return simulate(m, cfg, seed);
}

}  // namespace qfc
