#pragma once

// Classical versions of the driving noise processes: covariance kernels of
// self-adjoint creation/annihilation/gauge combinations in the vacuum state,
// the quantum-Markov and martingale covariance predicates, samplers for the
// classical realizations, and the transition-operator construction of
// time-ordered moments.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <utility>
#include <vector>

#include "qfc/common.hpp"
#include "qfc/numerics.hpp"

namespace qfc {

struct NoiseCoefficients {
  std::function<cplx(double)> alpha;
  std::function<cplx(double)> beta;
  std::function<cplx(double)> gamma;
  double t_max = 1.0;

  static NoiseCoefficients constant(cplx a, cplx b, cplx g, double t_max) {
    return NoiseCoefficients{[a](double) { return a; }, [b](double) { return b; },
                             [g](double) { return g; }, t_max};
  }
};

// A classical version exists only for self-adjoint combinations:
// beta = conj(alpha) and gamma real nonnegative, checked on a grid.
inline void require_classical(const NoiseCoefficients& nc, int n_samples = 257) {
  for (int i = 0; i < n_samples; ++i) {
    double t = nc.t_max * i / (n_samples - 1.0);
    cplx a = nc.alpha(t), b = nc.beta(t), g = nc.gamma(t);
    if (std::abs(b - std::conj(a)) > 1e-12)
      throw ClassicalityViolationError("noise coefficients: beta != conj(alpha) at t=" +
                                       std::to_string(t));
    if (std::abs(g.imag()) > 1e-12 || g.real() < -1e-12)
      throw ClassicalityViolationError("noise coefficients: gamma not real >= 0 at t=" +
                                       std::to_string(t));
  }
}

struct CovarianceFunction {
  std::function<double(double, double)> evaluator;
  double t_max = 1.0;
  double operator()(double s, double t) const { return evaluator(s, t); }

  static CovarianceFunction brownian(double t_max) {
    return {[](double s, double t) { return std::min(s, t); }, t_max};
  }
  static CovarianceFunction ornstein_uhlenbeck(double t_max) {
    return {[](double s, double t) { return std::exp(-std::abs(t - s)); }, t_max};
  }
};

// Vacuum pairing of dZ = alpha dA + beta dA*: c(s,t) = int_0^{min} alpha*beta.
inline CovarianceFunction vacuum_covariance(const NoiseCoefficients& nc) {
  require_classical(nc);
  auto alpha = nc.alpha;
  auto beta = nc.beta;
  auto eval = [alpha, beta](double s, double t) {
    double upper = std::min(s, t);
    return adaptive_simpson(
        [&](double u) { return (alpha(u) * beta(u)).real(); }, 0.0, upper, 1e-10);
  };
  return CovarianceFunction{eval, nc.t_max};
}

// Adds the compensated gauge component: integrand |alpha|^2 + intensity*gamma^2.
inline CovarianceFunction counting_compensated_covariance(const NoiseCoefficients& nc,
                                                          double intensity = 1.0) {
  require_classical(nc);
  if (intensity < 0.0)
    throw ClassicalityViolationError("counting_compensated_covariance: negative intensity");
  auto alpha = nc.alpha;
  auto beta = nc.beta;
  auto gamma = nc.gamma;
  auto eval = [alpha, beta, gamma, intensity](double s, double t) {
    double upper = std::min(s, t);
    return adaptive_simpson(
        [&](double u) {
          double g = gamma(u).real();
          return (alpha(u) * beta(u)).real() + intensity * g * g;
        },
        0.0, upper, 1e-10);
  };
  return CovarianceFunction{eval, nc.t_max};
}

// Covariance factorization c(t,s)c(u,u) = c(t,u)c(u,s) for all s <= u <= t.
inline bool is_quantum_markov(const CovarianceFunction& c, const std::vector<double>& grid,
                              double tol) {
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t j = i; j < grid.size(); ++j)
      for (std::size_t k = j; k < grid.size(); ++k) {
        double s = grid[i], u = grid[j], t = grid[k];
        if (std::abs(c(t, s) * c(u, u) - c(t, u) * c(u, s)) > tol) return false;
      }
  return true;
}

// Martingale criterion: c(s,t) = c(s,s) for all s <= t.
inline bool is_martingale_covariance(const CovarianceFunction& c,
                                     const std::vector<double>& grid, double tol) {
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t j = i; j < grid.size(); ++j)
      if (std::abs(c(grid[i], grid[j]) - c(grid[i], grid[i])) > tol) return false;
  return true;
}

struct SamplePath {
  std::vector<double> grid;
  std::vector<double> values;
};

inline void require_path_grid(const std::vector<double>& grid) {
  if (grid.empty() || grid.front() != 0.0)
    throw InvalidCovarianceError("sample grid must start at 0");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (grid[i] <= grid[i - 1])
      throw InvalidCovarianceError("sample grid must be strictly increasing");
}

// Mean-zero Gaussian vector with Gram matrix c(grid x grid). The factor comes
// from a clipped spectral decomposition so exactly singular Gram matrices
// (e.g. the t=0 row) are handled.
inline SamplePath sample_gaussian_version(const CovarianceFunction& c,
                                          const std::vector<double>& grid,
                                          std::uint64_t seed) {
  require_path_grid(grid);
  const std::size_t n = grid.size();
  Eigen::MatrixXd gram(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double v = c(grid[i], grid[j]);
      gram(i, j) = v;
      gram(j, i) = v;
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  double scale = std::max(1.0, gram.diagonal().maxCoeff());
  if (es.eigenvalues().minCoeff() < -1e-10 * scale)
    throw InvalidCovarianceError("Gram matrix indefinite: min eigenvalue " +
                                 std::to_string(es.eigenvalues().minCoeff()));
  Eigen::MatrixXd factor =
      es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

  std::mt19937_64 eng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(n);
  for (std::size_t i = 0; i < n; ++i) z(i) = normal(eng);
  Eigen::VectorXd v = factor * z;

  SamplePath path{grid, std::vector<double>(v.data(), v.data() + n)};
  if (c(grid[0], grid[0]) == 0.0) path.values[0] = 0.0;
  return path;
}

// Counting path via per-step Bernoulli thinning; the 0.1 guard keeps the
// thinning bias below statistical resolution.
inline SamplePath sample_counting_version(const std::function<double(double)>& intensity,
                                          const std::vector<double>& grid,
                                          std::uint64_t seed) {
  require_path_grid(grid);
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  SamplePath path{grid, std::vector<double>(grid.size(), 0.0)};
  double count = 0.0;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    double dt = grid[k] - grid[k - 1];
    double lam = intensity(grid[k - 1]);
    if (lam < 0.0) throw InvalidCovarianceError("negative intensity");
    double p = lam * dt;
    if (p > 0.1)
      throw StepTooCoarseError("intensity*dt = " + std::to_string(p) + " exceeds 0.1");
    if (unif(eng) < p) count += 1.0;
    path.values[k] = count;
  }
  return path;
}

using TestFunction = std::function<double(double)>;

struct MomentSpec {
  std::vector<double> times;
  std::vector<TestFunction> functions;
  std::vector<std::string> labels;
};

namespace testfn {
inline TestFunction coordinate() {
  return [](double x) { return x; };
}
inline TestFunction square() {
  return [](double x) { return x * x; };
}
inline TestFunction indicator(double a, double b) {
  return [a, b](double x) { return (x >= a && x <= b) ? 1.0 : 0.0; };
}
inline TestFunction one() {
  return [](double) { return 1.0; };
}
}  // namespace testfn

// Transition operator of the Brownian kernel:
// (K_{s,t} h)(x) = E[h(x + N(0, c(t,t)-c(s,s)))], 64-node Gauss-Hermite.
inline TestFunction transition_apply(const TestFunction& h, double s, double t,
                                     const CovarianceFunction& c) {
  if (s > t) throw InvalidKernelError("transition_apply: s > t");
  double var = c(t, t) - c(s, s);
  if (var < -1e-12)
    throw InvalidKernelError("transition_apply: negative variance increment " +
                             std::to_string(var));
  if (var <= 0.0) return h;
  return [h, var](double x) { return gauss_hermite_expect(h, x, var); };
}

// Chained-kernel evaluation of E[h_1(X_{t_1}) ... h_n(X_{t_n})]:
// fold the kernels right to left, then integrate against the law of X_{t_1}.
inline double time_ordered_moment(const MomentSpec& spec, const CovarianceFunction& c) {
  if (spec.times.empty() || spec.times.size() != spec.functions.size())
    throw InvalidKernelError("time_ordered_moment: empty or mismatched spec");
  for (std::size_t i = 1; i < spec.times.size(); ++i)
    if (spec.times[i] < spec.times[i - 1])
      throw InvalidKernelError("time_ordered_moment: times not ascending");

  TestFunction g = spec.functions.back();
  for (std::size_t k = spec.times.size() - 1; k-- > 0;) {
    TestFunction kg = transition_apply(g, spec.times[k], spec.times[k + 1], c);
    TestFunction hk = spec.functions[k];
    g = [hk, kg](double x) { return hk(x) * kg(x); };
  }
  double var0 = c(spec.times.front(), spec.times.front());
  return gaussian_expect_adaptive(g, 0.0, var0);
}

}  // namespace qfc
