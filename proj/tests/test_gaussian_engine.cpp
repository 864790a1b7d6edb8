#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "unravel/gaussian_engine.hpp"
#include "unravel/oracle.hpp"

using namespace unravel;

namespace {

BosonEnvironment single_mode(double omega = 1.4, double g = 0.4) {
  BosonEnvironment env;
  env.modes = {{omega, g}};
  env.L = pauli::minus();
  return env;
}

CVector superposition() {
  CVector psi(2);
  psi << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
  return psi;
}

MatrixFunction level(double omega0) {
  return [omega0](double) { return CMatrix(omega0 * pauli::plus() * pauli::minus()); };
}

CMatrix random_complex(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> n;
  CMatrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = Complex(n(gen), n(gen));
  return m;
}

}  // namespace

TEST_CASE("kernel functions") {
  const BosonEnvironment env = single_mode();
  const auto k0 = kernel_functions(env, 0.0);
  CHECK(std::abs(k0.f1 - Complex(0.16)) < 1e-15);
  CHECK(k0.f2 == Complex(0.0));
  const auto a = kernel_functions(env, 0.7), b = kernel_functions(env, -0.7);
  CHECK(std::abs(a.f1 - std::conj(b.f1)) < 1e-15);
  CHECK(std::abs(a.f1 - 0.16 * std::exp(Complex(0, -0.98))) < 1e-15);

  BosonEnvironment warm = env;
  warm.beta = InverseTemperature::finite(2.0);
  const auto w = kernel_functions(warm, 0.0);
  const double nbar = 1.0 / std::expm1(2.8);
  CHECK(w.f1.real() == doctest::Approx(0.16 * (nbar + 1.0)));
  CHECK(w.f2.real() == doctest::Approx(0.16 * nbar));
  warm.beta = InverseTemperature::finite(0.0);
  CHECK_THROWS_AS(kernel_functions(warm, 0.0), ConfigError);
}

TEST_CASE("kernel block symmetries") {
  BosonEnvironment env = single_mode();
  env.modes.push_back({0.6, Complex(0.1, 0.2)});
  env.beta = InverseTemperature::finite(1.5);
  for (auto [t, s] : {std::pair{1.0, 0.3}, {0.3, 1.0}, {2.0, 2.0}}) {
    const KernelBlock ts = kernel_block(env, t, s), st = kernel_block(env, s, t);
    CHECK(std::abs(std::conj(ts.k11) - st.k22) < 1e-15);
    CHECK(std::abs(std::conj(ts.k12) - st.k12) < 1e-15);
  }
  // Equal times: theta_0(0) = 0, theta_1(0) = 1.
  const KernelValues kv = kernel_functions(env, 0.0);
  const KernelBlock eq = kernel_block(env, 1.0, 1.0);
  CHECK(std::abs(eq.k11 + kv.f2) < 1e-15);
  CHECK(std::abs(eq.k22 + kv.f2) < 1e-15);
}

TEST_CASE("augmented covariance blocks") {
  const TimeGrid grid(0.0, 5.0, 7);
  const KernelTable table = assemble_kernel_matrix(single_mode(), grid);
  REQUIRE(table.times.size() == 8);
  // Independent reference for this grid: minimum eigenvalue of the real form.
  try {
    build_augmented_covariance(table, grid);
    FAIL("expected CovarianceNotPsd");
  } catch (const CovarianceNotPsd& e) {
    CHECK(e.min_eigenvalue == doctest::Approx(-0.3014472188622887).epsilon(1e-10));
    CHECK(e.max_diagonal == doctest::Approx(0.08).epsilon(1e-12));
  }
}

TEST_CASE("sampler reproduces given blocks") {
  // zeta = M w with w real standard normal: Z = M M^dag, R = M M^T.
  const CMatrix m = random_complex(2, 4, 3) * 0.5;
  const CMatrix z = m * m.adjoint(), r = m * m.transpose();
  const CMatrix s = random_complex(4, 4, 5) * 0.2;
  const CMatrix i = s + s.transpose().eval();
  const AugmentedCovariance cov = augmented_from_blocks(z, r, i);
  CHECK(cov.min_eigenvalue > -1e-12);
  StreamRng rng(9, 0);
  const std::size_t n = 100000;
  const auto draws = sample_processes(cov, rng, n);
  CMatrix ez = CMatrix::Zero(2, 2), er = CMatrix::Zero(2, 2), ee = CMatrix::Zero(4, 4);
  for (const auto& d : draws) {
    const CVector v = d.zeta1.row(0).transpose();
    ez += v * v.adjoint();
    er += v * v.transpose();
    const CVector e = d.eta.row(0).transpose();
    ee += e * e.transpose();
  }
  ez /= double(n);
  er /= double(n);
  ee /= double(n);
  const double scale = z.cwiseAbs().maxCoeff();
  CHECK(max_abs(CMatrix(ez - z)) < 0.03 * scale);
  CHECK(max_abs(CMatrix(er - r)) < 0.03 * scale);
  CHECK(max_abs(CMatrix(ee - 4.0 * i)) < 0.03 * (4.0 * i).cwiseAbs().maxCoeff() + 0.02);

  SUBCASE("proper blocks have no complementary part") {
    const AugmentedCovariance p = augmented_from_blocks(z, CMatrix::Zero(2, 2), CMatrix::Zero(4, 4));
    StreamRng rng2(4, 0);
    CMatrix acc = CMatrix::Zero(2, 2);
    for (const auto& d : sample_processes(p, rng2, n)) {
      const CVector v = d.zeta1.row(0).transpose();
      acc += v * v.transpose();
    }
    CHECK(max_abs(CMatrix(acc / double(n))) < 0.03 * scale);
  }
  SUBCASE("shape and definiteness are validated") {
    CHECK_THROWS_AS(augmented_from_blocks(z, r, CMatrix::Zero(2, 2)), ShapeError);
    CHECK_THROWS_AS(augmented_from_blocks(CMatrix(-z), r, i), CovarianceNotPsd);
  }
}

TEST_CASE("driving law covariance") {
  const TimeGrid grid(0.0, 1.0, 5);
  const DrivingLaw law = build_driving_law(single_mode(), grid);
  const Index p = 4 * law.n;
  CHECK(law.n == 5);
  CHECK(max_abs(CMatrix(law.complementary - law.complementary.transpose())) < 1e-15);
  CHECK((law.factor * law.factor.transpose() - law.real_covariance).cwiseAbs().maxCoeff() < 1e-10);
  StreamRng rng(2, 0);
  const int n = 100000;
  CMatrix sum = CMatrix::Zero(p, p);
  Matrix<double> sq = Matrix<double>::Zero(p, p);
  for (int i = 0; i < n; ++i) {
    const CMatrix u = sample_driving(law, rng);
    CVector v(p);
    for (int k = 0; k < law.n; ++k) v.segment<4>(4 * k) = u.row(k).transpose();
    const CMatrix o = v * v.transpose();
    sum += o;
    sq += o.cwiseAbs2();
  }
  int bad = 0;
  for (Index a = 0; a < p; ++a)
    for (Index b = 0; b < p; ++b) {
      const double sd = std::sqrt(sq(a, b) / n);
      bad += std::abs(sum(a, b) / double(n) - law.complementary(a, b)) > 5.0 * sd / std::sqrt(n);
    }
  CHECK(bad == 0);
}

TEST_CASE("decoupled environment gives unitary evolution") {
  const TimeGrid grid(0.0, 3.0, 300);
  DgsRunConfig cfg;
  cfg.n_traj = 4;
  const auto r = run_dgs_ensemble(single_mode(1.4, 0.0), level(1.0), superposition(), grid, cfg);
  for (int k = 0; k < grid.size(); ++k) {
    const double t = grid.time(k);
    // exp(-i t |e><e|) on (1, 1)/sqrt 2: sigma_x expectation cos t.
    CHECK(std::abs(r.estimate.obs_mean(k, 0) - std::cos(t)) < 1e-8);
    CHECK(std::abs(r.estimate.obs_mean(k, 2)) < 1e-10);
    CHECK(r.estimate.obs_se(k, 0) < 1e-10);
  }
}

TEST_CASE("ensemble agrees with the exact reduced dynamics") {
  const SpinBosonParams p{0.4, 0.4};
  const TimeGrid grid(0.0, 5.0, 100);
  const CVector psi = superposition();
  const CMatrix rho0 = psi * psi.adjoint();
  DgsRunConfig cfg;
  cfg.n_traj = 4000;
  const auto a = run_dgs_ensemble(single_mode(), level(1.0), psi, grid, cfg);
  cfg.seed = 2;
  cfg.driving.extra_proper = 0.5 * CMatrix::Identity(4 * grid.n_steps, 4 * grid.n_steps);
  const auto b = run_dgs_ensemble(single_mode(), level(1.0), psi, grid, cfg);
  int ok_a = 0, ok_ab = 0, total = 0;
  for (int k = 0; k < grid.size(); ++k) {
    const CMatrix exact = unravel::apply(spin_boson_lab_flow(grid.time(k), 1.0, p), rho0);
    for (int o = 0; o < 3; ++o, ++total) {
      const double ref = expectation(exact, a.estimate.observables[o]);
      const double ma = a.estimate.obs_mean(k, o), sa = a.estimate.obs_se(k, o);
      const double mb = b.estimate.obs_mean(k, o), sb = b.estimate.obs_se(k, o);
      ok_a += std::abs(ma - ref) <= 3.0 * sa + 1e-12;
      ok_ab += std::abs(ma - mb) <= 3.0 * std::hypot(sa, sb) + 1e-12;
    }
  }
  CHECK(double(ok_a) / total >= 0.9);
  CHECK(double(ok_ab) / total >= 0.9);
  CHECK(b.proper_trace > a.proper_trace);
}

TEST_CASE("worker count does not change the result") {
  const TimeGrid grid(0.0, 2.0, 40);
  DgsRunConfig cfg;
  cfg.n_traj = 700;
  cfg.workers = 1;
  const auto a = run_dgs_ensemble(single_mode(), level(1.0), superposition(), grid, cfg);
  cfg.workers = 3;
  const auto b = run_dgs_ensemble(single_mode(), level(1.0), superposition(), grid, cfg);
  CHECK(a.estimate.obs_mean == b.estimate.obs_mean);
  CHECK(a.estimate.obs_se == b.estimate.obs_se);
}
