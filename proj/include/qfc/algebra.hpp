#pragma once

// Dense complex matrix algebra for finite-dimensional open quantum systems:
// generators, expectations, and density-matrix hygiene. Everything here is a
// pure function of its inputs.

#include <cmath>
#include <utility>

#include "qfc/common.hpp"

namespace qfc {

inline constexpr double kHermTol = 1e-12;
inline constexpr double kTraceTol = 1e-9;
inline constexpr double kEigTol = 1e-8;

inline void require_square(const Mat& a, const char* what) {
  if (a.rows() != a.cols() || a.rows() < 1)
    throw DimensionMismatchError(std::string(what) + ": matrix must be square, got " +
                                 std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
}

inline void require_same_dim(const Mat& a, const Mat& b, const char* what) {
  require_square(a, what);
  require_square(b, what);
  if (a.rows() != b.rows())
    throw DimensionMismatchError(std::string(what) + ": dimension mismatch " +
                                 std::to_string(a.rows()) + " vs " + std::to_string(b.rows()));
}

template <class MatT>
double hermiticity_defect_t(const MatT& a) {
  return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

inline double hermiticity_defect(const Mat& a) { return hermiticity_defect_t(a); }

// Eigenvalues of a Hermitian matrix, ascending. dim-2 goes through the closed
// form; larger dims use Eigen's self-adjoint solver.
inline std::vector<double> hermitian_eigenvalues(const Mat& a) {
  require_square(a, "hermitian_eigenvalues");
  if (a.rows() == 2) {
    double tr = a(0, 0).real() + a(1, 1).real();
    double det = (a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0)).real();
    double disc = std::sqrt(std::max(tr * tr - 4.0 * det, 0.0));
    return {0.5 * (tr - disc), 0.5 * (tr + disc)};
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(a, Eigen::EigenvaluesOnly);
  std::vector<double> out(es.eigenvalues().data(),
                          es.eigenvalues().data() + es.eigenvalues().size());
  return out;
}

class HermitianObservable {
 public:
  explicit HermitianObservable(Mat m) : m_(std::move(m)) {
    require_square(m_, "HermitianObservable");
    double defect = hermiticity_defect(m_);
    if (defect > kHermTol)
      throw NumericalConsistencyError("HermitianObservable: hermiticity defect " +
                                      std::to_string(defect));
  }
  const Mat& mat() const { return m_; }
  Eigen::Index dim() const { return m_.rows(); }

 private:
  Mat m_;
};

class DensityMatrix {
 public:
  explicit DensityMatrix(Mat m) : m_(std::move(m)) {
    require_square(m_, "DensityMatrix");
    double herm = hermiticity_defect(m_);
    if (herm > kHermTol)
      throw NumericalConsistencyError("DensityMatrix: hermiticity defect " +
                                      std::to_string(herm));
    double tr = m_.trace().real();
    if (std::abs(tr - 1.0) > kTraceTol)
      throw NumericalConsistencyError("DensityMatrix: trace " + std::to_string(tr));
    double lo = hermitian_eigenvalues(m_).front();
    if (lo < -kEigTol)
      throw PositivityViolationError("DensityMatrix: eigenvalue " + std::to_string(lo), lo);
  }

  static DensityMatrix pure(const Vec& psi) {
    Vec n = psi / psi.norm();
    return DensityMatrix(n * n.adjoint());
  }

  const Mat& mat() const { return m_; }
  Eigen::Index dim() const { return m_.rows(); }

 private:
  Mat m_;
};

struct SystemModel {
  SystemModel(HermitianObservable hamiltonian, Mat coupling, DensityMatrix initial)
      : H(std::move(hamiltonian)), L(std::move(coupling)), rho0(std::move(initial)) {
    require_square(L, "SystemModel.L");
    if (H.dim() != L.rows() || L.rows() != rho0.dim())
      throw DimensionMismatchError("SystemModel: H, L, rho0 dims disagree");
    dim = static_cast<int>(L.rows());
  }
  int dim;
  HermitianObservable H;
  Mat L;
  DensityMatrix rho0;
};

inline Mat commutator(const Mat& a, const Mat& b) {
  require_same_dim(a, b, "commutator");
  return a * b - b * a;
}

// Heisenberg generator L_{L,H}(X) = i[H,X] + L*XL - 1/2 {L*L, X}.
inline Mat lindblad_generator(const SystemModel& m, const HermitianObservable& x) {
  if (x.dim() != m.dim) throw DimensionMismatchError("lindblad_generator: X dim");
  const Mat& X = x.mat();
  const Mat& L = m.L;
  Mat LdL = L.adjoint() * L;
  return cplx(0, 1) * commutator(m.H.mat(), X) + L.adjoint() * X * L -
         0.5 * (LdL * X + X * LdL);
}

// Predual of the generator: Ldag(rho) = -i[H,rho] + L rho L* - 1/2 {L*L, rho}.
inline Mat adjoint_generator(const SystemModel& m, const Mat& rho) {
  require_square(rho, "adjoint_generator");
  if (rho.rows() != m.dim) throw DimensionMismatchError("adjoint_generator: rho dim");
  const Mat& L = m.L;
  Mat LdL = L.adjoint() * L;
  return cplx(0, -1) * commutator(m.H.mat(), rho) + L * rho * L.adjoint() -
         0.5 * (LdL * rho + rho * LdL);
}

inline Mat adjoint_generator(const SystemModel& m, const DensityMatrix& rho) {
  return adjoint_generator(m, rho.mat());
}

inline double expectation(const DensityMatrix& rho, const HermitianObservable& x) {
  if (rho.dim() != x.dim()) throw DimensionMismatchError("expectation: dims");
  cplx tr = (rho.mat() * x.mat()).trace();
  if (std::abs(tr.imag()) > 1e-10)
    throw NumericalConsistencyError("expectation: imaginary part " +
                                    std::to_string(tr.imag()));
  return tr.real();
}

// Smallest eigenvalue of a (presumed Hermitian) matrix; dim 2 takes the
// closed form so fixed-size stepping loops avoid the solver.
template <class MatT>
double min_eigenvalue_t(const MatT& rho) {
  if (rho.rows() == 2) {
    double tr2 = rho(0, 0).real() + rho(1, 1).real();
    double det = (rho(0, 0) * rho(1, 1) - rho(0, 1) * rho(1, 0)).real();
    double disc = std::sqrt(std::max(tr2 * tr2 - 4.0 * det, 0.0));
    return 0.5 * (tr2 - disc);
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(Mat(rho), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// Projects a Hermitian matrix onto the PSD cone by dropping negative spectrum.
template <class MatT>
void clip_negative_in_place(MatT& rho) {
  if (rho.rows() == 2) {
    double tr2 = rho(0, 0).real() + rho(1, 1).real();
    double det = (rho(0, 0) * rho(1, 1) - rho(0, 1) * rho(1, 0)).real();
    double disc = std::sqrt(std::max(tr2 * tr2 - 4.0 * det, 0.0));
    double lo = 0.5 * (tr2 - disc);
    if (lo < 0.0) {
      // rho = l+ P+ + l- P-; drop the negative part: rho - l- (rho - l+ I)/(l- - l+).
      double hi = 0.5 * (tr2 + disc);
      double f = lo / (lo - hi);
      rho = (rho * (1.0 - f)).eval();
      rho(0, 0) += f * hi;
      rho(1, 1) += f * hi;
    }
  } else {
    Mat herm = rho;
    Eigen::SelfAdjointEigenSolver<Mat> es(herm);
    if (es.eigenvalues().minCoeff() < 0.0) {
      Eigen::VectorXd w = es.eigenvalues().cwiseMax(0.0);
      Mat clipped = es.eigenvectors() * w.asDiagonal().toDenseMatrix().cast<cplx>() *
                    es.eigenvectors().adjoint();
      rho = MatT(0.5 * (clipped + clipped.adjoint()));
    }
  }
}

// Numerical hygiene for emitted states: symmetrize, clip small negative
// eigenvalues, renormalize the trace. Violations beyond tol are errors, not
// silent fixes. Templated so the fixed-size stepping loops can use it without
// heap traffic; dim 2 takes the closed-form eigenvalue path.
template <class MatT>
void repair_in_place(MatT& rho, double tol) {
  if (hermiticity_defect_t(rho) >= tol)
    throw NumericalConsistencyError("repair_state: hermiticity defect beyond tol");
  rho = (0.5 * (rho + rho.adjoint())).eval();

  double lo = min_eigenvalue_t(rho);
  if (lo < -tol)
    throw PositivityViolationError("repair_state: eigenvalue " + std::to_string(lo), lo);
  if (lo < 0.0) clip_negative_in_place(rho);

  double tr = rho.trace().real();
  if (tr < tol)
    throw DegenerateStateError("repair_state: trace " + std::to_string(tr));
  rho /= tr;
}

inline DensityMatrix repair_state(const Mat& rho_in, double tol) {
  require_square(rho_in, "repair_state");
  Mat rho = rho_in;
  repair_in_place(rho, tol);
  return DensityMatrix(std::move(rho));
}

// ---------------------------------------------------------------------------
// Stock operators.
// ---------------------------------------------------------------------------

inline Mat pauli_x() {
  Mat m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

inline Mat pauli_y() {
  Mat m(2, 2);
  m << 0, cplx(0, -1), cplx(0, 1), 0;
  return m;
}

inline Mat pauli_z() {
  Mat m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

// Lowering operator in the (excited, ground) basis: sigma_minus |e> = |g>.
inline Mat sigma_minus() {
  Mat m(2, 2);
  m << 0, 0, 1, 0;
  return m;
}

inline Mat identity(Eigen::Index n) { return Mat::Identity(n, n); }

inline DensityMatrix excited_state() {
  Vec e(2);
  e << 1, 0;
  return DensityMatrix::pure(e);
}

inline DensityMatrix ground_state() {
  Vec g(2);
  g << 0, 1;
  return DensityMatrix::pure(g);
}

// The canonical desk-scale instance: spontaneously decaying qubit.
inline SystemModel decaying_qubit() {
  return SystemModel(HermitianObservable(Mat::Zero(2, 2)), sigma_minus(), excited_state());
}

}  // namespace qfc
