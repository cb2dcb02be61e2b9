#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "qfc/dynamics.hpp"
#include "qfc/filters.hpp"

using namespace qfc;

namespace {

DensityMatrix random_qubit_density(std::mt19937_64& eng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Mat a(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) a(i, j) = cplx(g(eng), g(eng));
  Mat rho = a * a.adjoint();
  rho /= rho.trace().real();
  return DensityMatrix(0.5 * (rho + rho.adjoint()));
}

Mat random_hermitian2(std::mt19937_64& eng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Mat a(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) a(i, j) = cplx(g(eng), g(eng));
  return 0.5 * (a + a.adjoint());
}

}  // namespace

TEST_CASE("ks_homodyne_step") {
  SECTION("null model learns nothing") {
    SystemModel m(HermitianObservable(Mat::Zero(2, 2)), Mat::Zero(2, 2), excited_state());
    auto next = ks_homodyne_step(m, m.rho0, 0.37, 1e-3);
    CHECK((next.mat() - m.rho0.mat()).cwiseAbs().maxCoeff() < 1e-15);
  }

  SECTION("zero innovation leaves only the deterministic drift") {
    SystemModel m = decaying_qubit();
    std::mt19937_64 eng(3);
    DensityMatrix rho = random_qubit_density(eng);
    double dt = 1e-3;
    double mean = (rho.mat() * (m.L + m.L.adjoint())).trace().real();
    Mat updated = ks_homodyne_update(m, rho, mean * dt, dt);
    Mat drift_only = rho.mat() + adjoint_generator(m, rho) * dt;
    CHECK((updated - drift_only).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("moment/density duality (per step, pre-repair)") {
  std::mt19937_64 eng(41);
  std::normal_distribution<double> g(0.0, 1.0);
  double dt = 1e-3;
  for (int rep = 0; rep < 200; ++rep) {
    SystemModel m(HermitianObservable(random_hermitian2(eng)),
                  [&] {
                    Mat a(2, 2);
                    for (int i = 0; i < 2; ++i)
                      for (int j = 0; j < 2; ++j) a(i, j) = cplx(g(eng), g(eng));
                    return a;
                  }(),
                  random_qubit_density(eng));
    DensityMatrix rho = random_qubit_density(eng);
    double dY = g(eng) * std::sqrt(dt);
    Mat delta = ks_homodyne_update(m, rho, dY, dt) - rho.mat();
    HermitianObservable x(random_hermitian2(eng));
    double via_density = (x.mat() * delta).trace().real();
    double via_moment = pi_step_homodyne(m, rho, x, dY, dt);
    CHECK(std::abs(via_density - via_moment) < 1e-12);

    // X = I: normalization conserved exactly by the moment form
    CHECK(std::abs(pi_step_homodyne(m, rho, HermitianObservable(identity(2)), dY, dt)) <
          1e-14);
  }

  SECTION("closed system reduces to the Ehrenfest term") {
    std::mt19937_64 eng2(43);
    SystemModel m(HermitianObservable(pauli_x()), Mat::Zero(2, 2), excited_state());
    DensityMatrix rho = random_qubit_density(eng2);
    HermitianObservable x(pauli_z());
    double dt2 = 1e-3;
    double expect =
        (rho.mat() * (cplx(0, 1) * commutator(pauli_x(), pauli_z()))).trace().real() * dt2;
    CHECK(pi_step_homodyne(m, rho, x, 0.02, dt2) == Catch::Approx(expect).margin(1e-15));
  }
}

TEST_CASE("jump_filter_step") {
  double dt = 1e-3;

  SECTION("null model, no count: state unchanged") {
    SystemModel m(HermitianObservable(Mat::Zero(2, 2)), Mat::Zero(2, 2), excited_state());
    auto next = jump_filter_step(m, m.rho0, 0, dt);
    CHECK((next.mat() - m.rho0.mat()).cwiseAbs().maxCoeff() < 1e-15);
  }

  SECTION("count from the excited state lands on the ground state") {
    SystemModel m = decaying_qubit();
    auto next = jump_filter_step(m, excited_state(), 1, dt);
    CHECK((next.mat() - ground_state().mat()).cwiseAbs().maxCoeff() < 1e-12);
  }

  SECTION("count at vanishing predicted intensity is an error") {
    SystemModel m(HermitianObservable(Mat::Zero(2, 2)), sigma_minus(), ground_state());
    CHECK_THROWS_AS(jump_filter_step(m, ground_state(), 1, dt), ZeroRateJumpError);
    // but a no-count step is fine
    auto next = jump_filter_step(m, ground_state(), 0, dt);
    CHECK((next.mat() - ground_state().mat()).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("run_filter self-consistency") {
  SystemModel m = decaying_qubit();
  std::vector<HermitianObservable> tracked{HermitianObservable(pauli_z())};

  SECTION("homodyne: truth record in, truth states out") {
    SimConfig cfg{1e-3, 2.0, 0, Scheme::homodyne};
    auto truth = simulate_homodyne(m, cfg, 2718);
    auto ft = run_filter(m, truth.record, tracked);
    double worst = 0.0;
    for (std::size_t k = 0; k < ft.states.size(); ++k)
      worst = std::max(worst,
                       (ft.states[k].mat() - truth.states[k].mat()).cwiseAbs().maxCoeff());
    CHECK(worst <= 1e-10);
  }

  SECTION("counting: truth record in, truth states out") {
    SimConfig cfg{1e-3, 2.0, 0, Scheme::counting};
    auto truth = simulate_counting(m, cfg, 577);
    auto ft = run_filter(m, truth.record, tracked);
    double worst = 0.0;
    for (std::size_t k = 0; k < ft.states.size(); ++k)
      worst = std::max(worst,
                       (ft.states[k].mat() - truth.states[k].mat()).cwiseAbs().maxCoeff());
    CHECK(worst <= 1e-10);
  }
}

TEST_CASE("run_filter contracts") {
  SystemModel m = decaying_qubit();
  SimConfig cfg{1e-3, 1.0, 0, Scheme::homodyne};
  auto truth = simulate_homodyne(m, cfg, 31415);

  SECTION("moment coherence and normalization") {
    std::vector<HermitianObservable> tracked{HermitianObservable(pauli_z()),
                                             HermitianObservable(identity(2))};
    auto ft = run_filter(m, truth.record, tracked);
    for (std::size_t k = 0; k < ft.grid.size(); ++k) {
      // Moments come from the raw recursion state; emitted states carry the
      // positivity clip, so the two readouts agree up to the clip scale.
      double direct = (ft.states[k].mat() * pauli_z()).trace().real();
      CHECK(std::abs(ft.moments[0][k] - direct) < 0.15);
      CHECK(std::abs(ft.moments[1][k] - 1.0) < 1e-9);
      // Emitted states are normalized and positive semidefinite.
      CHECK(std::abs(ft.states[k].mat().trace().real() - 1.0) < 1e-12);
      CHECK(hermitian_eigenvalues(ft.states[k].mat()).front() >= -1e-12);
    }
  }

  SECTION("empty observable list gives a states-only trajectory") {
    auto ft = run_filter(m, truth.record, {});
    CHECK(ft.moments.empty());
    CHECK(ft.states.size() == ft.grid.size());
  }

  SECTION("all-zero record with no coupling keeps the prior") {
    SystemModel null_m(HermitianObservable(Mat::Zero(2, 2)), Mat::Zero(2, 2),
                       excited_state());
    MeasurementRecord rec{uniform_grid(1e-3, 100), std::vector<double>(100, 0.0),
                          Scheme::homodyne};
    auto ft = run_filter(null_m, rec, {});
    CHECK((ft.states.back().mat() - null_m.rho0.mat()).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("innovations statistics") {
  SECTION("no coupling: innovations are the raw noise, unit variance slope") {
    SystemModel m(HermitianObservable(Mat::Zero(2, 2)), Mat::Zero(2, 2), excited_state());
    SimConfig cfg{1e-3, 2.0, 0, Scheme::homodyne};
    auto truth = simulate_homodyne(m, cfg, 161803);
    auto ft = run_filter(m, truth.record, {});
    auto st = innovations_statistics(ft);
    // QV/T estimator: sd ~ sqrt(2 dt / T)
    CHECK(std::abs(st.variance_slope - 1.0) < 3.0 * std::sqrt(2.0 * cfg.dt / cfg.t_max));
    CHECK(std::abs(st.mean_normalized) < 3.0 / std::sqrt(2000.0));
    CHECK(std::abs(st.excess_kurtosis) < 0.3);
  }

  SECTION("counting innovations are compensated counts") {
    SystemModel m = decaying_qubit();
    SimConfig cfg{1e-3, 20.0, 0, Scheme::counting};
    MeanVar terminal;
    for (int i = 0; i < 300; ++i) {
      auto truth = simulate_counting(m, cfg, derive_seed(88, i));
      auto ft = run_filter(m, truth.record, {});
      auto st = innovations_statistics(ft);
      terminal.add(st.terminal);
    }
    CHECK(std::abs(terminal.mean) < 3.0 * terminal.stderr_mean() + 1e-3);
  }
}
