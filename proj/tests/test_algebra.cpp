#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "qfc/algebra.hpp"

using namespace qfc;

namespace {

Mat random_hermitian(int n, std::mt19937_64& eng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Mat a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = cplx(g(eng), g(eng));
  return 0.5 * (a + a.adjoint());
}

Mat random_matrix(int n, std::mt19937_64& eng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Mat a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = cplx(g(eng), g(eng));
  return a;
}

DensityMatrix random_density(int n, std::mt19937_64& eng) {
  Mat a = random_matrix(n, eng);
  Mat rho = a * a.adjoint();
  rho /= rho.trace().real();
  return DensityMatrix(0.5 * (rho + rho.adjoint()));
}

}  // namespace

TEST_CASE("commutator basics") {
  CHECK((commutator(pauli_x(), pauli_x())).cwiseAbs().maxCoeff() == 0.0);

  // [sx, sy] = 2i sz, by direct 2x2 arithmetic
  Mat expect = cplx(0, 2) * pauli_z();
  CHECK((commutator(pauli_x(), pauli_y()) - expect).cwiseAbs().maxCoeff() < 1e-15);

  std::mt19937_64 eng(7);
  Mat b = random_matrix(2, eng);
  CHECK(commutator(identity(2), b).cwiseAbs().maxCoeff() < 1e-15);

  CHECK_THROWS_AS(commutator(identity(2), identity(3)), DimensionMismatchError);
}

TEST_CASE("lindblad generator") {
  std::mt19937_64 eng(11);

  SECTION("L = 0 gives i[H,X]; vanishes on X = H") {
    Mat h = random_hermitian(2, eng);
    SystemModel m(HermitianObservable(h), Mat::Zero(2, 2), excited_state());
    Mat gen = lindblad_generator(m, HermitianObservable(h));
    CHECK(gen.cwiseAbs().maxCoeff() < 1e-14);
    Mat x = random_hermitian(2, eng);
    Mat expect = cplx(0, 1) * commutator(h, x);
    CHECK((lindblad_generator(m, HermitianObservable(x)) - expect).cwiseAbs().maxCoeff() <
          1e-14);
  }

  SECTION("unitality: L(I) = 0") {
    for (int dim : {2, 3, 4}) {
      Mat h = random_hermitian(dim, eng);
      SystemModel m(HermitianObservable(h), random_matrix(dim, eng),
                    random_density(dim, eng));
      CHECK(lindblad_generator(m, HermitianObservable(identity(dim))).cwiseAbs().maxCoeff() <
            1e-12);
    }
  }

  SECTION("decaying qubit: L(sz) = -(I + sz)") {
    SystemModel m = decaying_qubit();
    Mat expect = -(identity(2) + pauli_z());
    CHECK((lindblad_generator(m, HermitianObservable(pauli_z())) - expect)
              .cwiseAbs()
              .maxCoeff() < 1e-14);
  }

  SECTION("hermiticity preserved") {
    for (int dim : {2, 3, 4}) {
      SystemModel m(HermitianObservable(random_hermitian(dim, eng)),
                    random_matrix(dim, eng), random_density(dim, eng));
      Mat gen = lindblad_generator(m, HermitianObservable(random_hermitian(dim, eng)));
      CHECK(hermiticity_defect(gen) < 1e-12);
    }
  }
}

TEST_CASE("adjoint generator") {
  std::mt19937_64 eng(13);

  SECTION("null model") {
    SystemModel m(HermitianObservable(Mat::Zero(2, 2)), Mat::Zero(2, 2), excited_state());
    CHECK(adjoint_generator(m, m.rho0).cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("decay from excited state") {
    SystemModel m = decaying_qubit();
    Mat expect = ground_state().mat() - excited_state().mat();
    CHECK((adjoint_generator(m, m.rho0) - expect).cwiseAbs().maxCoeff() < 1e-14);
  }

  SECTION("tracelessness and duality with the Heisenberg generator") {
    for (int dim : {2, 3, 4}) {
      for (int rep = 0; rep < 20; ++rep) {
        SystemModel m(HermitianObservable(random_hermitian(dim, eng)),
                      random_matrix(dim, eng), random_density(dim, eng));
        Mat x = random_hermitian(dim, eng);
        Mat adj = adjoint_generator(m, m.rho0);
        CHECK(std::abs(adj.trace()) < 1e-12);
        cplx lhs = (x * adj).trace();
        cplx rhs = (lindblad_generator(m, HermitianObservable(x)) * m.rho0.mat()).trace();
        CHECK(std::abs(lhs - rhs) < 1e-12);
      }
    }
  }
}

TEST_CASE("expectation") {
  std::mt19937_64 eng(17);
  DensityMatrix rho = random_density(2, eng);
  CHECK(expectation(rho, HermitianObservable(identity(2))) == Catch::Approx(1.0).margin(1e-12));
  CHECK(expectation(excited_state(), HermitianObservable(pauli_z())) ==
        Catch::Approx(1.0).margin(1e-12));
  DensityMatrix mixed(0.5 * identity(2));
  CHECK(expectation(mixed, HermitianObservable(pauli_x())) ==
        Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("repair_state") {
  SECTION("fixed point on valid input") {
    std::mt19937_64 eng(19);
    for (int dim : {2, 3, 4}) {
      DensityMatrix rho = random_density(dim, eng);
      DensityMatrix repaired = repair_state(rho.mat(), 1e-4);
      CHECK((repaired.mat() - rho.mat()).cwiseAbs().maxCoeff() < 1e-15);
    }
  }

  SECTION("clip and renormalize") {
    Mat m(2, 2);
    m << 1.000001, 0, 0, -0.000001;
    DensityMatrix repaired = repair_state(m, 1e-4);
    CHECK(repaired.mat()(0, 0).real() == Catch::Approx(1.0).margin(1e-12));
    CHECK(std::abs(repaired.mat()(1, 1)) < 1e-12);
  }

  SECTION("violation beyond tol is an error") {
    Mat m(2, 2);
    m << 0.5, 0, 0, -0.5;
    CHECK_THROWS_AS(repair_state(m, 1e-4), PositivityViolationError);
    try {
      repair_state(m, 1e-4);
    } catch (const PositivityViolationError& e) {
      CHECK(e.eigenvalue == Catch::Approx(-0.5).margin(1e-12));
    }
  }

  SECTION("degenerate trace is an error") {
    Mat m = Mat::Zero(2, 2);
    CHECK_THROWS_AS(repair_state(m, 1e-4), DegenerateStateError);
  }

  SECTION("idempotence") {
    std::mt19937_64 eng(23);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
      Mat noise(3, 3);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) noise(i, j) = cplx(g(eng), g(eng));
      Mat dirty = random_density(3, eng).mat() + 1e-5 * 0.5 * (noise + noise.adjoint());
      Mat once = repair_state(dirty, 1e-3).mat();
      Mat twice = repair_state(once, 1e-3).mat();
      CHECK((once - twice).cwiseAbs().maxCoeff() < 1e-14);
    }
  }
}

TEST_CASE("domain type invariants") {
  Mat nh(2, 2);
  nh << 0, 1, 0, 0;
  CHECK_THROWS_AS(HermitianObservable(nh), NumericalConsistencyError);

  Mat half = 0.5 * identity(2);
  CHECK_THROWS_AS(DensityMatrix(Mat(0.9 * half)), NumericalConsistencyError);

  CHECK_THROWS_AS(SystemModel(HermitianObservable(identity(3)), sigma_minus(),
                              excited_state()),
                  DimensionMismatchError);
}
