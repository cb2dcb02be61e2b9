#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qfc {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

inline constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Error hierarchy. Every failure mode named by a module contract gets its own
// type so callers (and tests) can dispatch on it.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionMismatchError : Error {
  using Error::Error;
};

struct NumericalConsistencyError : Error {
  using Error::Error;
};

struct PositivityViolationError : Error {
  PositivityViolationError(const std::string& msg, double eig)
      : Error(msg), eigenvalue(eig) {}
  double eigenvalue;
};

struct DegenerateStateError : Error {
  using Error::Error;
};

struct ClassicalityViolationError : Error {
  using Error::Error;
};

struct InvalidCovarianceError : Error {
  using Error::Error;
};

struct StepTooCoarseError : Error {
  using Error::Error;
};

struct InvalidKernelError : Error {
  using Error::Error;
};

struct ZeroRateJumpError : Error {
  using Error::Error;
};

struct DegenerateUpdateError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Seed derivation. Per-trajectory substreams come from a splittable
// counter-based mix of (master_seed, index), so batch order never matters.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master ^ splitmix64(index + 0x51700d2bULL));
}

// Compensated (Kahan) accumulator for order-insensitive ensemble sums.
class KahanSum {
 public:
  void add(double x) {
    double y = x - comp_;
    double t = sum_ + y;
    comp_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct MeanVar {
  // Welford running mean/variance.
  void add(double x) {
    ++n;
    double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
  double stderr_mean() const {
    return n > 1 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0;
  }
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;
};

}  // namespace qfc
