#pragma once

// Conditional-state recursions: the diffusive (homodyne) filter and the
// counting-process filter, in density form, with the observable-moment form
// kept as a per-step validation operation and innovations extraction.

#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include "qfc/algebra.hpp"
#include "qfc/record.hpp"

namespace qfc {

// Abort threshold for per-step positivity repair. Euler negativity excursions
// scale like -chi^2 * dt, so this only trips on genuine blow-ups.
inline constexpr double kStepRepairTol = 0.5;

// The recursion tolerates negative eigenvalue excursions below this fixed
// threshold. Euler steps produce O(dt) excursions by construction, and
// projecting them back onto the cone every step biases the conditional
// moments at an order below the scheme's own; the in-loop clip is therefore a
// pure stability guard that fires only on excursions far beyond the
// discretization scale. Full positivity hygiene is applied when states are
// emitted.
inline constexpr double kStepClipThreshold = 0.05;

// Gain is suppressed below this predicted intensity; an observed count there
// is a model/record mismatch, not a state to divide by.
inline constexpr double kJumpRateFloor = 1e-12;

namespace detail {

template <class MatT>
double real_trace_product(const MatT& a, const MatT& b) {
  // tr(ab) = sum_ij a_ij b_ji
  return a.cwiseProduct(b.transpose()).sum().real();
}

// Precomputed operators for the stepping loops, templated on the matrix type
// so qubit-scale runs stay on fixed-size arithmetic.
template <class MatT>
struct ModelKernel {
  MatT H, L, Ldag, LdagL, Lsum;
  bool has_hamiltonian;

  static ModelKernel from(const SystemModel& m) {
    ModelKernel k;
    k.H = m.H.mat();
    k.L = m.L;
    k.Ldag = m.L.adjoint();
    k.LdagL = (k.Ldag * k.L).eval();
    k.Lsum = (k.L + k.Ldag).eval();
    k.has_hamiltonian = m.H.mat().cwiseAbs().maxCoeff() > 0.0;
    return k;
  }

  MatT initial_state(const SystemModel& m) const { return MatT(m.rho0.mat()); }

  double homodyne_rate(const MatT& rho) const { return real_trace_product(Lsum, rho); }
  double counting_rate(const MatT& rho) const { return real_trace_product(LdagL, rho); }

  // Pre-repair Euler update of the diffusive filter, innovation-gated.
  MatT homodyne_update(const MatT& rho, double dY, double dt) const {
    double mean = homodyne_rate(rho);
    MatT lrho = L * rho;
    MatT drift = lrho * Ldag - 0.5 * (LdagL * rho + rho * LdagL);
    if (has_hamiltonian) drift += cplx(0, -1) * (H * rho - rho * H);
    MatT gain = lrho + lrho.adjoint() - mean * rho;
    return rho + drift * dt + gain * (dY - mean * dt);
  }

  // Pre-repair update of the counting filter. The no-count branch reduces
  // exactly to the normalized no-jump drift; a count applies the jump gain.
  MatT counting_update(const MatT& rho, double dN, double dt, double& rate) const {
    rate = counting_rate(rho);
    MatT jump_num = L * rho * Ldag;
    MatT drift = jump_num - 0.5 * (LdagL * rho + rho * LdagL);
    if (has_hamiltonian) drift += cplx(0, -1) * (H * rho - rho * H);
    if (rate < kJumpRateFloor) {
      if (dN != 0.0)
        throw ZeroRateJumpError("observed count with predicted intensity " +
                                std::to_string(rate));
      return rho + drift * dt;
    }
    MatT gain = jump_num / rate - rho;
    return rho + drift * dt + gain * (dN - rate * dt);
  }
};

// In-loop hygiene after one Euler update: symmetrize, renormalize the trace,
// clip only excursions beyond the fixed stability threshold, abort on
// blow-ups.
template <class MatT>
void step_hygiene(MatT& rho) {
  rho = (0.5 * (rho + rho.adjoint())).eval();
  double lo = min_eigenvalue_t(rho);
  if (lo < -kStepRepairTol)
    throw PositivityViolationError("step_hygiene: eigenvalue " + std::to_string(lo), lo);
  if (lo < -kStepClipThreshold) clip_negative_in_place(rho);
  double tr = rho.trace().real();
  if (tr < kStepRepairTol)
    throw DegenerateStateError("step_hygiene: trace " + std::to_string(tr));
  rho /= tr;
}

// Runs the filter recursion over a record, invoking
// on_step(step_index, innovation_increment, rho_after_hygiene). The streamed
// state is the raw recursion state; emitted DensityMatrix objects get the
// full positivity repair at readout.
template <class MatT, class F>
void filter_stream(const SystemModel& m, const MeasurementRecord& record, F&& on_step) {
  auto kernel = ModelKernel<MatT>::from(m);
  MatT rho = kernel.initial_state(m);
  const double dt = record.dt();
  for (std::size_t k = 0; k < record.n_steps(); ++k) {
    double dy = record.increments[k];
    double innovation;
    if (record.scheme == Scheme::homodyne) {
      innovation = dy - kernel.homodyne_rate(rho) * dt;
      rho = kernel.homodyne_update(rho, dy, dt);
    } else {
      innovation = dy - kernel.counting_rate(rho) * dt;
      double rate;
      rho = kernel.counting_update(rho, dy, dt, rate);
    }
    try {
      step_hygiene(rho);
    } catch (const Error& e) {
      throw PositivityViolationError("filter step " + std::to_string(k) + ": " + e.what(),
                                     0.0);
    }
    on_step(k, innovation, rho);
  }
}

template <class F>
void dispatch_dim(const SystemModel& m, F&& f) {
  if (m.dim == 2)
    f(static_cast<Eigen::Matrix2cd*>(nullptr));
  else
    f(static_cast<Mat*>(nullptr));
}

}  // namespace detail

// --- single-step operations (density form) --------------------------------

inline Mat ks_homodyne_update(const SystemModel& m, const DensityMatrix& rho, double dY,
                              double dt) {
  auto kernel = detail::ModelKernel<Mat>::from(m);
  return kernel.homodyne_update(rho.mat(), dY, dt);
}

inline DensityMatrix ks_homodyne_step(const SystemModel& m, const DensityMatrix& rho,
                                      double dY, double dt,
                                      double repair_tol = kStepRepairTol) {
  Mat next = ks_homodyne_update(m, rho, dY, dt);
  return repair_state(next, repair_tol);
}

inline Mat jump_filter_update(const SystemModel& m, const DensityMatrix& rho, int dN,
                              double dt) {
  auto kernel = detail::ModelKernel<Mat>::from(m);
  double rate;
  return kernel.counting_update(rho.mat(), static_cast<double>(dN), dt, rate);
}

inline DensityMatrix jump_filter_step(const SystemModel& m, const DensityMatrix& rho,
                                      int dN, double dt,
                                      double repair_tol = kStepRepairTol) {
  Mat next = jump_filter_update(m, rho, dN, dt);
  return repair_state(next, repair_tol);
}

// Observable-moment form of the homodyne filter, one Euler increment:
// dpi = pi(L(X))dt + (pi(L*X + XL) - pi(L+L*)pi(X)) (dY - pi(L+L*)dt).
inline double pi_step_homodyne(const SystemModel& m, const DensityMatrix& rho,
                               const HermitianObservable& x, double dY, double dt) {
  if (x.dim() != m.dim) throw DimensionMismatchError("pi_step_homodyne: X dim");
  const Mat& X = x.mat();
  const Mat& r = rho.mat();
  Mat Lsum = m.L + m.L.adjoint();
  double pi_x = (r * X).trace().real();
  double pi_h = (r * Lsum).trace().real();
  double pi_lx = (r * (m.L.adjoint() * X + X * m.L)).trace().real();
  double drift = (r * lindblad_generator(m, x)).trace().real();
  return drift * dt + (pi_lx - pi_h * pi_x) * (dY - pi_h * dt);
}

// --- full recursion over a record ------------------------------------------

inline FilterTrajectory run_filter(const SystemModel& m, const MeasurementRecord& record,
                                   const std::vector<HermitianObservable>& tracked) {
  record.validate();
  for (const auto& x : tracked)
    if (x.dim() != m.dim) throw DimensionMismatchError("run_filter: tracked observable dim");

  FilterTrajectory ft;
  ft.scheme = record.scheme;
  ft.grid = record.grid;
  ft.states.reserve(record.grid.size());
  ft.states.push_back(m.rho0);
  ft.moments.assign(tracked.size(), {});
  ft.innovations.reserve(record.n_steps());
  for (std::size_t j = 0; j < tracked.size(); ++j)
    ft.moments[j].push_back(expectation(m.rho0, tracked[j]));

  detail::dispatch_dim(m, [&](auto* tag) {
    using MatT = std::remove_pointer_t<decltype(tag)>;
    detail::filter_stream<MatT>(m, record, [&](std::size_t, double innovation,
                                               const MatT& rho) {
      ft.innovations.push_back(innovation);
      // Moments read the raw recursion state (the weakly accurate estimator);
      // the stored density matrix gets full positivity hygiene.
      for (std::size_t j = 0; j < tracked.size(); ++j)
        ft.moments[j].push_back(
            detail::real_trace_product(Mat(rho), tracked[j].mat()));
      ft.states.push_back(repair_state(Mat(rho), kStepRepairTol));
    });
  });
  return ft;
}

// --- innovations diagnostics ------------------------------------------------

struct InnovationsStats {
  std::vector<double> cumulative;  // running innovations path, one per step
  double terminal = 0.0;
  double mean_normalized = 0.0;  // mean of dm/sqrt(dt)
  double variance_slope = 0.0;   // quadratic variation per unit time
  double excess_kurtosis = 0.0;  // of normalized increments
};

inline InnovationsStats innovations_statistics(const FilterTrajectory& ft) {
  InnovationsStats st;
  const std::size_t n = ft.innovations.size();
  if (n == 0 || ft.grid.size() != n + 1) return st;
  double dt = ft.grid[1] - ft.grid[0];
  double t_total = ft.grid.back() - ft.grid.front();
  st.cumulative.resize(n);
  KahanSum path, qv, z1, z2, z4;
  double sdt = std::sqrt(dt);
  for (std::size_t k = 0; k < n; ++k) {
    double dm = ft.innovations[k];
    path.add(dm);
    st.cumulative[k] = path.value();
    qv.add(dm * dm);
    double z = dm / sdt;
    z1.add(z);
    z2.add(z * z);
    z4.add(z * z * z * z);
  }
  st.terminal = path.value();
  st.mean_normalized = z1.value() / static_cast<double>(n);
  st.variance_slope = qv.value() / t_total;
  double m2 = z2.value() / static_cast<double>(n);
  double m4 = z4.value() / static_cast<double>(n);
  st.excess_kurtosis = m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;
  return st;
}

}  // namespace qfc
