#pragma once

// Derivation-independent reference route: discrete Kraus/Bayes repeated
// measurement updates, plus the statistical testers (tower property, moment
// Monte-Carlo) used to validate the filters without reusing their derivation.

#include <cmath>
#include <string>
#include <vector>

#include "qfc/dynamics.hpp"
#include "qfc/qsc.hpp"

namespace qfc {

struct KrausStep {
  std::vector<Mat> operators;
  Scheme scheme;
  double dt;

  // Second-moment POVM representation for one step: {I + (-iH - L*L/2)dt, sqrt(dt) L}.
  static KrausStep make(const SystemModel& m, Scheme scheme, double dt) {
    Mat K = cplx(0, -1) * m.H.mat() - 0.5 * (m.L.adjoint() * m.L);
    KrausStep ks;
    ks.scheme = scheme;
    ks.dt = dt;
    ks.operators = {Mat(identity(m.dim) + K * dt), Mat(std::sqrt(dt) * m.L)};
    return ks;
  }

  // Operator-norm distance of sum M_i* M_i from identity; O(dt^2) by design.
  double completeness_defect() const {
    Mat sum = Mat::Zero(operators.front().rows(), operators.front().cols());
    for (const Mat& op : operators) sum += op.adjoint() * op;
    Mat defect = sum - identity(sum.rows());
    Eigen::SelfAdjointEigenSolver<Mat> es(defect, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
};

namespace detail {

// Stateful one-record Kraus/Bayes recursion, templated like the filter kernel.
template <class MatT>
struct KrausKernel {
  MatT M0, L;
  Scheme scheme;
  double dt;
  double sqrt_dt;

  static KrausKernel from(const SystemModel& m, Scheme scheme, double dt) {
    KrausKernel k;
    Mat K = cplx(0, -1) * m.H.mat() - 0.5 * (m.L.adjoint() * m.L);
    k.M0 = MatT(identity(m.dim) + K * dt);
    k.L = MatT(m.L);
    k.scheme = scheme;
    k.dt = dt;
    k.sqrt_dt = std::sqrt(dt);
    return k;
  }

  void step(MatT& rho, double dy) const {
    MatT M = (scheme == Scheme::homodyne)
                 ? MatT(M0 + L * dy)
                 : (dy != 0.0 ? MatT(L * sqrt_dt) : M0);
    MatT next = M * rho * M.adjoint();
    double nrm = next.trace().real();
    if (nrm < 1e-300)
      throw DegenerateUpdateError("kraus_bayes_filter: vanishing normalization");
    rho = next / nrm;
    rho = (0.5 * (rho + rho.adjoint())).eval();
  }
};

}  // namespace detail

inline FilterTrajectory kraus_bayes_filter(const SystemModel& m,
                                           const MeasurementRecord& record,
                                           const std::vector<HermitianObservable>& tracked) {
  record.validate();
  FilterTrajectory ft;
  ft.scheme = record.scheme;
  ft.grid = record.grid;
  ft.states.push_back(m.rho0);
  ft.moments.assign(tracked.size(), {});
  for (std::size_t j = 0; j < tracked.size(); ++j)
    ft.moments[j].push_back(expectation(m.rho0, tracked[j]));

  detail::dispatch_dim(m, [&](auto* tag) {
    using MatT = std::remove_pointer_t<decltype(tag)>;
    auto kernel = detail::KrausKernel<MatT>::from(m, record.scheme, record.dt());
    MatT rho = MatT(m.rho0.mat());
    const double dt = record.dt();
    auto filter_kernel = detail::ModelKernel<MatT>::from(m);
    for (std::size_t k = 0; k < record.n_steps(); ++k) {
      double rate = record.scheme == Scheme::homodyne ? filter_kernel.homodyne_rate(rho)
                                                      : filter_kernel.counting_rate(rho);
      ft.innovations.push_back(record.increments[k] - rate * dt);
      kernel.step(rho, record.increments[k]);
      ft.states.emplace_back(Mat(rho));
      for (std::size_t j = 0; j < tracked.size(); ++j)
        ft.moments[j].push_back(detail::real_trace_product(Mat(rho), tracked[j].mat()));
    }
  });
  return ft;
}

// --- tower property ---------------------------------------------------------

struct TowerEntry {
  std::string label;
  double lhs = 0.0;
  double rhs = 0.0;
  double sigma = 0.0;
  double deviation_sigmas = 0.0;
  bool pass = true;
};

struct TowerReport {
  std::vector<TowerEntry> entries;
  bool pass = true;
};

inline TowerEntry make_tower_entry(const std::string& label, const MeanVar& a, double b,
                                   double sigma_b) {
  TowerEntry e;
  e.label = label;
  e.lhs = a.mean;
  e.rhs = b;
  e.sigma = std::sqrt(a.stderr_mean() * a.stderr_mean() + sigma_b * sigma_b);
  e.deviation_sigmas = e.sigma > 0.0 ? std::abs(e.lhs - e.rhs) / e.sigma : 0.0;
  e.pass = e.deviation_sigmas <= 3.0;
  return e;
}

// E[pi_t(X) g(Y)] compared across routes, for g in {1, Y_{t/2}, 1[Y_{t/2}>0]}.
// Routes: the filter recursion (identical to the truth simulation), the
// independent Kraus/Bayes oracle, and for g = 1 the Lindblad reference.
inline TowerReport tower_property_check(const SystemModel& m, Scheme scheme,
                                        const HermitianObservable& x, std::size_t n_traj,
                                        std::uint64_t master_seed, double dt = 1e-3,
                                        double t_final = 2.0) {
  if (n_traj < 1000) throw ConfigError("tower_property_check: n_traj must be >= 1000");
  SimConfig cfg{dt, t_final, master_seed, scheme};
  const std::size_t n_steps = cfg.n_steps();
  const std::size_t half = n_steps / 2;

  // Lindblad reference at t_final (dense RK4 grid).
  auto ref_states = lindblad_evolve(m, uniform_grid(dt, n_steps));
  double lindblad_ref = expectation(ref_states.back(), x);

  struct Acc {
    MeanVar fg[3];  // filter moment times g
    MeanVar kg[3];  // kraus moment times g
    MeanVar tg[3];  // truth-simulation moment times g
  } acc;

  detail::dispatch_dim(m, [&](auto* tag) {
    using MatT = std::remove_pointer_t<decltype(tag)>;
    const MatT X = MatT(x.mat());
    for (std::size_t i = 0; i < n_traj; ++i) {
      auto kraus = detail::KrausKernel<MatT>::from(m, scheme, dt);
      MatT rho_k = MatT(m.rho0.mat());
      double y_half = 0.0;
      KahanSum y;
      MatT rho_t = rho_k;
      detail::simulate_stream<MatT>(
          m, cfg, derive_seed(master_seed, i),
          [&](std::size_t k, double dy, const MatT& rho) {
            y.add(dy);
            if (k + 1 == half) y_half = y.value();
            kraus.step(rho_k, dy);
            if (k + 1 == n_steps) rho_t = rho;
          });
      double pi_truth = detail::real_trace_product(rho_t, X);
      double pi_filter = pi_truth;  // shared recursion; see filters module
      double pi_kraus = detail::real_trace_product(rho_k, X);
      double gs[3] = {1.0, y_half, y_half > 0.0 ? 1.0 : 0.0};
      for (int j = 0; j < 3; ++j) {
        acc.fg[j].add(pi_filter * gs[j]);
        acc.kg[j].add(pi_kraus * gs[j]);
        acc.tg[j].add(pi_truth * gs[j]);
      }
    }
  });

  const char* gnames[3] = {"g=1", "g=Y(t/2)", "g=1[Y(t/2)>0]"};
  TowerReport report;
  report.entries.push_back(
      make_tower_entry("g=1: filter vs lindblad", acc.fg[0], lindblad_ref, 0.0));
  for (int j = 0; j < 3; ++j) {
    report.entries.push_back(make_tower_entry(std::string(gnames[j]) + ": filter vs truth",
                                              acc.fg[j], acc.tg[j].mean,
                                              acc.tg[j].stderr_mean()));
    report.entries.push_back(make_tower_entry(std::string(gnames[j]) + ": filter vs kraus",
                                              acc.fg[j], acc.kg[j].mean,
                                              acc.kg[j].stderr_mean()));
  }
  for (const auto& e : report.entries) report.pass = report.pass && e.pass;
  return report;
}

// --- Monte-Carlo side of the time-ordered moment equality --------------------

struct MomentCheckReport {
  double analytic = 0.0;
  double empirical = 0.0;
  double stderr_mean = 0.0;
  double deviation_sigmas = 0.0;
  bool pass = false;
};

inline MomentCheckReport moment_mc_check(const MomentSpec& spec, const CovarianceFunction& c,
                                         std::size_t n_paths, std::uint64_t seed) {
  if (n_paths < 10000) throw ConfigError("moment_mc_check: n_paths must be >= 10000");
  std::vector<double> grid{0.0};
  for (double t : spec.times)
    if (t > grid.back()) grid.push_back(t);

  // Index of each spec time in the sampling grid.
  std::vector<std::size_t> idx;
  for (double t : spec.times) {
    std::size_t j = 0;
    while (grid[j] != t) ++j;
    idx.push_back(j);
  }

  MomentCheckReport rep;
  rep.analytic = time_ordered_moment(spec, c);
  MeanVar mv;
  for (std::size_t i = 0; i < n_paths; ++i) {
    SamplePath path = sample_gaussian_version(c, grid, derive_seed(seed, i));
    double prod = 1.0;
    for (std::size_t k = 0; k < spec.functions.size(); ++k)
      prod *= spec.functions[k](path.values[idx[k]]);
    mv.add(prod);
  }
  rep.empirical = mv.mean;
  rep.stderr_mean = mv.stderr_mean();
  rep.deviation_sigmas =
      rep.stderr_mean > 0.0 ? std::abs(rep.analytic - rep.empirical) / rep.stderr_mean : 0.0;
  rep.pass = rep.deviation_sigmas <= 3.0;
  return rep;
}

}  // namespace qfc
