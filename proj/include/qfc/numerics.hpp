#pragma once

// Quadrature utilities: adaptive Simpson for covariance integrals and
// Golub-Welsch Gauss-Hermite nodes for transition kernels.

#include <cmath>
#include <functional>
#include <vector>

#include "qfc/common.hpp"

namespace qfc {

namespace detail {

template <class F>
double simpson_rec(const F& f, double a, double b, double fa, double fm, double fb,
                   double whole, double tol, int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

template <class F>
double adaptive_simpson(const F& f, double a, double b, double tol = 1e-10,
                        int max_depth = 40) {
  if (a == b) return 0.0;
  double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

struct GaussHermiteRule {
  // Physicists' convention: integral f(y) e^{-y^2} dy ~ sum w_i f(x_i).
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Nodes via Golub-Welsch on the symmetric tridiagonal Jacobi matrix.
inline const GaussHermiteRule& gauss_hermite_64() {
  static const GaussHermiteRule rule = [] {
    constexpr int n = 64;
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) {
      double off = std::sqrt(i / 2.0);
      jac(i, i - 1) = off;
      jac(i - 1, i) = off;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
    GaussHermiteRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    const double sqrt_pi = std::sqrt(M_PI);
    for (int i = 0; i < n; ++i) {
      r.nodes[i] = es.eigenvalues()(i);
      double v0 = es.eigenvectors()(0, i);
      r.weights[i] = sqrt_pi * v0 * v0;
    }
    return r;
  }();
  return rule;
}

// E[f(Z)] for Z ~ N(mean, var) via the 64-node rule.
template <class F>
double gauss_hermite_expect(const F& f, double mean, double var) {
  const auto& r = gauss_hermite_64();
  double s = std::sqrt(2.0 * std::max(var, 0.0));
  double acc = 0.0;
  for (std::size_t i = 0; i < r.nodes.size(); ++i)
    acc += r.weights[i] * f(mean + s * r.nodes[i]);
  return acc / std::sqrt(M_PI);
}

// E[f(Z)] for Z ~ N(mean, var) via adaptive Simpson on [-10, 10] sigma.
// Used for the outermost law integral where f may be discontinuous.
template <class F>
double gaussian_expect_adaptive(const F& f, double mean, double var, double tol = 1e-9) {
  if (var <= 0.0) return f(mean);
  double s = std::sqrt(var);
  auto integrand = [&](double x) {
    double z = (x - mean) / s;
    return f(x) * std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * M_PI));
  };
  return adaptive_simpson(integrand, mean - 10.0 * s, mean + 10.0 * s, tol);
}

}  // namespace qfc
