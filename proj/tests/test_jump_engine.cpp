#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "unravel/jump_engine.hpp"
#include "unravel/oracle.hpp"

using namespace unravel;

namespace {

CVector superposition() {
  CVector psi(2);
  psi << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
  return psi;
}

double fraction_within(const EnsembleEstimate& est, const std::vector<CMatrix>& exact,
                       double band) {
  int ok = 0, total = 0;
  for (std::size_t k = 0; k < exact.size(); ++k) {
    for (Index o = 0; o < est.obs_mean.cols(); ++o, ++total) {
      const double ref = expectation(exact[k], est.observables[o]);
      const double se = est.obs_se(k, o);
      ok += std::abs(est.obs_mean(k, o) - ref) <= band * se + 1e-12;
    }
  }
  return double(ok) / double(total);
}

}  // namespace

TEST_CASE("rate policy") {
  RatePolicy p;
  p.c0 = 0.0;
  auto r = choose_rates({2.0, 3.0}, p);
  CHECK(r.c == 0.0);
  CHECK(r.r == std::vector<double>{2.0, 3.0});
  p.c0 = 0.5;
  r = choose_rates({-1.0, 2.0}, p);
  CHECK(r.c == 1.5);
  CHECK(r.r == std::vector<double>{0.5, 3.5});
  r = choose_rates({0.0}, p);
  CHECK(r.c == 0.5);
  CHECK(r.r == std::vector<double>{0.5});
  p.r_max = 2.0;
  CHECK(choose_rates({5.0}, p).r[0] == 2.0);
}

TEST_CASE("channel completion") {
  SUBCASE("spin-boson adds sigma_plus") {
    const auto set = complete_channels(spin_boson_model({0.4, 0.4}));
    REQUIRE(set.channels.size() == 2);
    CHECK(set.channels[1].completion);
    CHECK(set.channels[1].op == pauli::plus());
    CHECK(set.g == doctest::Approx(1.0));
  }
  SUBCASE("normalized Pauli set is already complete") {
    const double s = 1.0 / std::sqrt(2.0);
    auto one = [](double) { return 1.0; };
    const auto set = complete_channels(
        {{s * pauli::x(), one}, {s * pauli::y(), one}, {s * pauli::z(), one}}, 2);
    CHECK(set.channels.size() == 3);
    CHECK(set.g == doctest::Approx(1.5));
  }
  SUBCASE("projector deficiency") {
    CMatrix p = CMatrix::Zero(2, 2);
    p(0, 0) = 1.0;
    const auto set = complete_channels({{p, [](double) { return 1.0; }}}, 2);
    REQUIRE(set.channels.size() == 2);
    CMatrix e22 = CMatrix::Zero(2, 2);
    e22(1, 1) = 1.0;
    CHECK(max_abs(CMatrix(set.channels[1].op - e22)) < 1e-15);
    CHECK(set.g == doctest::Approx(1.0));
  }
  SUBCASE("generic route for a lone lowering operator") {
    const auto set = complete_channels({{pauli::minus(), [](double) { return 1.0; }}}, 2);
    REQUIRE(set.channels.size() == 2);
    std::vector<CMatrix> ops{set.channels[0].op, set.channels[1].op};
    CHECK(check_channel_sum(ops).proportional);
  }
}

TEST_CASE("closed system is plain Schrodinger evolution") {
  const CMatrix h = pauli::x();
  const TimeGrid grid(0.0, 3.0, 300);
  StreamRng rng(1, 0);
  const auto path =
      run_trajectory({}, [h](double) { return h; }, superposition(), grid, {}, rng);
  CHECK(path.jumps.empty());
  CVector up(2);
  up << 1.0, 0.0;
  const auto p2 = run_trajectory({}, [h](double) { return h; }, up, grid, {}, rng);
  for (int k = 0; k < grid.size(); ++k) {
    CHECK(path.mu[k] == 1.0);
    const double t = grid.time(k);
    CHECK(std::abs(p2.psi[k](0) - std::cos(t)) < 1e-8);
    CHECK(std::abs(p2.psi[k](1) - Complex(0, -std::sin(t))) < 1e-8);
  }
}

TEST_CASE("nonnegative couplings without margin give mu = 1") {
  CanonicalModel m;
  m.dim = 2;
  m.hamiltonian = [](double) { return CMatrix(0.3 * pauli::z()); };
  m.channels.push_back({pauli::minus(), [](double) { return 0.7; }});
  m.completion = {pauli::plus()};
  JumpRunConfig cfg;
  cfg.n_traj = 600;
  cfg.options.policy.c0 = 0.0;
  cfg.estimator = EstimatorKind::raw;
  const auto r = run_jump_ensemble(m, superposition(), TimeGrid(0.0, 3.0, 300), cfg);
  CHECK((r.estimate.mu_mean.array() == 1.0).all());
  CHECK((r.estimate.mu_se.array() == 0.0).all());
  CHECK(r.diagnostics.total_jumps > 0);
}

TEST_CASE("pathwise invariants on the benchmark") {
  JumpRunConfig cfg;
  cfg.n_traj = 1024;
  const auto r =
      run_jump_ensemble(spin_boson_model({0.4, 0.4}), superposition(), TimeGrid(0.0, 10.0, 2000), cfg);
  CHECK(r.diagnostics.max_norm_defect < 1e-8);
  CHECK(r.diagnostics.max_factorization_defect < 1e-8);
  CHECK(r.diagnostics.c0 == 0.5);
  CHECK(r.diagnostics.g == doctest::Approx(1.0));
  SUBCASE("normalized trace is exact") {
    for (Index k = 0; k < r.estimate.trace_mean.size(); ++k)
      CHECK(std::abs(r.estimate.trace_mean(k) - 1.0) < 1e-12);
  }
}

TEST_CASE("positive and negative parts reproduce the raw estimate") {
  JumpRunConfig cfg;
  cfg.n_traj = 1024;
  cfg.estimator = EstimatorKind::raw;
  const auto r =
      run_jump_ensemble(spin_boson_model({0.4, 0.4}), superposition(), TimeGrid(0.0, 8.0, 800), cfg);
  bool negative = false;
  for (std::size_t k = 0; k < r.estimate.rho.size(); ++k) {
    CHECK(max_abs(CMatrix(r.estimate.rho_plus[k] - r.estimate.rho_minus[k] - r.estimate.rho[k])) <
          1e-12);
    negative |= max_abs(r.estimate.rho_minus[k]) > 0.0;
  }
  CHECK(negative);
}

TEST_CASE("small ensemble agrees with the oracle") {
  const CanonicalModel m = spin_boson_model({0.4, 0.4});
  const TimeGrid grid(0.0, 10.0, 1000);
  JumpRunConfig cfg;
  cfg.n_traj = 4000;
  cfg.seed = 3;
  const auto r = run_jump_ensemble(m, superposition(), grid, cfg);
  const CVector psi = superposition();
  const auto exact = integrate_master(m, CMatrix(psi * psi.adjoint()), grid);
  CHECK(fraction_within(r.estimate, exact, 2.0) >= 0.9);
  for (Index k = 0; k < r.estimate.mu_mean.size(); ++k)
    CHECK(std::abs(r.estimate.mu_mean(k) - 1.0) <= 4.0 * r.estimate.mu_se(k) + 1e-12);
}

TEST_CASE("Bernoulli sampling agrees at unit scale") {
  const CanonicalModel m = spin_boson_model({0.4, 0.4});
  const TimeGrid grid(0.0, 6.0, 1200);
  JumpRunConfig cfg;
  cfg.n_traj = 2000;
  cfg.options.sampling = JumpSampling::bernoulli;
  const auto r = run_jump_ensemble(m, superposition(), grid, cfg);
  const CVector psi = superposition();
  CHECK(fraction_within(r.estimate, integrate_master(m, CMatrix(psi * psi.adjoint()), grid), 3.0) >=
        0.9);
}

TEST_CASE("results do not depend on the worker count") {
  const CanonicalModel m = spin_boson_model({0.4, 0.4});
  const TimeGrid grid(0.0, 5.0, 500);
  JumpRunConfig cfg;
  cfg.n_traj = 1500;
  cfg.workers = 1;
  const auto a = run_jump_ensemble(m, superposition(), grid, cfg);
  cfg.workers = 3;
  const auto b = run_jump_ensemble(m, superposition(), grid, cfg);
  CHECK(a.estimate.obs_mean == b.estimate.obs_mean);
  CHECK(a.estimate.obs_se == b.estimate.obs_se);
  CHECK(a.estimate.mu_mean == b.estimate.mu_mean);
}

TEST_CASE("single trajectory records jumps and the martingale") {
  const auto set = complete_channels(spin_boson_model({0.4, 0.4}));
  const SpinBosonParams p{0.4, 0.4};
  const CMatrix n = pauli::plus() * pauli::minus();
  StreamRng rng(7, 0);
  const auto path = run_trajectory(
      set, [&](double t) { return CMatrix(-spin_boson_h(t, p) * n); }, superposition(),
      TimeGrid(0.0, 10.0, 2000), {}, rng);
  for (std::size_t j = 1; j < path.jumps.size(); ++j)
    CHECK(path.jumps[j].time >= path.jumps[j - 1].time);
  for (const auto& psi : path.psi) CHECK(std::abs(psi.norm() - 1.0) < 1e-8);
  CHECK(path.mu.front() == 1.0);
}

TEST_CASE("degenerate normalized ensemble") {
  // Zero detuning drives every path to zero weight after the first divergence.
  JumpRunConfig cfg;
  cfg.n_traj = 200;
  CVector ground(2);
  ground << 0.0, 1.0;
  CHECK_THROWS_AS(
      run_jump_ensemble(spin_boson_model({0.0, 0.4}), ground, TimeGrid(0.0, 8.0, 1600), cfg),
      DegenerateEnsemble);
}

TEST_CASE("invalid input") {
  JumpRunConfig cfg;
  cfg.n_traj = 1;
  CHECK_THROWS_AS(
      run_jump_ensemble(spin_boson_model({0.4, 0.4}), superposition(), TimeGrid(0.0, 1.0, 10), cfg),
      ConfigError);
  cfg.n_traj = 10;
  CHECK_THROWS_AS(run_jump_ensemble(spin_boson_model({0.4, 0.4}), CVector::Ones(2), TimeGrid(0.0, 1.0, 10),
                                    cfg),
                  ConfigError);
}
