#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "unravel/model.hpp"

using namespace unravel;

namespace {

const SpinBosonParams kBench{0.4, 0.4};

}  // namespace

TEST_CASE("coefficients at t = 0") {
  const auto c = spin_boson_coefficients(0.0, kBench);
  CHECK(std::abs(c.gamma - Complex(1.0)) < 1e-15);
  CHECK(c.w == 0.0);
}

// Frozen from exp(-iHt) of the single-excitation block [[0, g], [g, delta]]:
// gamma = exp(i delta t/2) conj(c_e), w = -2 Re(gamma'/gamma), h = Im(gamma'/gamma).
TEST_CASE("coefficients match the microscopic model") {
  struct Row {
    double t;
    Complex gamma;
    double w, h;
  };
  const Row rows[] = {
      {1.0, {0.9057931828375648, 0.17298832254605967}, 0.3280954398222093, 0.16481275415123256},
      {4.0, {0.44275398546364564, -0.2034926375808297}, -0.6364983947068973, -0.44231683473889594}};
  for (const auto& r : rows) {
    const auto c = spin_boson_coefficients(r.t, kBench);
    CHECK(std::abs(c.gamma - r.gamma) < 1e-12);
    CHECK(c.w == doctest::Approx(r.w).epsilon(1e-7));
    CHECK(c.h == doctest::Approx(r.h).epsilon(1e-7));
  }
}

TEST_CASE("zero detuning coupling is 2g tan(gt)") {
  const SpinBosonParams p{0.0, 0.4};
  for (double t : {0.3, 1.0, 2.5, 3.0})
    CHECK(spin_boson_w(t, p) == doctest::Approx(2.0 * 0.4 * std::tan(0.4 * t)).epsilon(1e-12));
  CHECK(spin_boson_h(1.0, p) == 0.0);
  CHECK_THROWS_AS(spin_boson_w(std::numbers::pi / (2.0 * 0.4), p), SingularCoupling);
}

TEST_CASE("first sign change of w") {
  const double t0 = std::numbers::pi / std::sqrt(0.8);
  CHECK(t0 == doctest::Approx(3.5124073655203634));
  CHECK(spin_boson_w(t0 - 1e-6, kBench) > 0.0);
  CHECK(spin_boson_w(t0 + 1e-6, kBench) < 0.0);
  // Next zero at (pi + 2 pi)/Omega.
  CHECK(spin_boson_w(3.0 * t0 - 1e-6, kBench) > 0.0);
  CHECK(spin_boson_w(3.0 * t0 + 1e-6, kBench) < 0.0);
}

TEST_CASE("flow is trace preserving and CP on the vacuum line") {
  const CVector tr = reshape(CMatrix::Identity(2, 2));
  CHECK(spin_boson_flow(0.0, kBench).matrix() == CMatrix::Identity(4, 4));
  for (double t : {0.5, 2.0, 4.0, 7.3}) {
    const Superop f = spin_boson_flow(t, kBench);
    CHECK((tr.transpose() * f.matrix() - tr.transpose()).cwiseAbs().maxCoeff() < 1e-15);
    const auto spec = choi_spectrum(f);
    CHECK(spec.cp);
    const double beta = std::norm(spin_boson_gamma(t, kBench));
    CHECK(spec.eigenvalues(0) == doctest::Approx(1.0 + beta));
    CHECK(spec.eigenvalues(1) == doctest::Approx(1.0 - beta));
  }
}

TEST_CASE("flow derivative equals the Liouvillian") {
  const CanonicalModel m = spin_boson_model(kBench);
  for (double t : {0.7, 2.2, 4.1, 6.0}) {
    const double e = 1e-5;
    const CMatrix df =
        (spin_boson_flow(t + e, kBench).matrix() - spin_boson_flow(t - e, kBench).matrix()) /
        (2.0 * e);
    const CMatrix lf = build_liouvillian(m, t).matrix() * spin_boson_flow(t, kBench).matrix();
    CHECK(max_abs(CMatrix(df - lf)) < 1e-8);
  }
}

TEST_CASE("lab flow derivative equals the lab Liouvillian") {
  // Lab frame: effective level shift omega0 - delta/2 + h_t, same channel.
  const double omega0 = 1.0;
  for (double t : {0.7, 2.2, 4.1}) {
    const double e = 1e-5;
    const CMatrix df = (spin_boson_lab_flow(t + e, omega0, kBench).matrix() -
                        spin_boson_lab_flow(t - e, omega0, kBench).matrix()) /
                       (2.0 * e);
    const CMatrix n = pauli::plus() * pauli::minus();
    const double h_lab = omega0 - 0.5 * kBench.delta + spin_boson_h(t, kBench);
    const Superop l = build_liouvillian(CMatrix(h_lab * n), {pauli::minus()},
                                        {spin_boson_w(t, kBench)});
    const CMatrix lf = l.matrix() * spin_boson_lab_flow(t, omega0, kBench).matrix();
    CHECK(max_abs(CMatrix(df - lf)) < 1e-8);
  }
}

TEST_CASE("Liouvillian assembly") {
  SUBCASE("Hamiltonian only") {
    const Superop l = build_liouvillian(pauli::z(), {}, {});
    const CMatrix diag = l.matrix().diagonal().asDiagonal();
    CHECK(max_abs(CMatrix(l.matrix() - diag)) == 0.0);
    CHECK(std::abs(l.matrix()(0, 0)) == 0.0);
    CHECK(std::abs(l.matrix()(1, 1) - Complex(0, -2)) < 1e-15);
    CHECK(std::abs(l.matrix()(2, 2) - Complex(0, 2)) < 1e-15);
    CHECK(std::abs(l.matrix()(3, 3)) == 0.0);
  }
  SUBCASE("zero couplings leave the Hamiltonian part") {
    const Superop a = build_liouvillian(pauli::x(), {pauli::minus()}, {0.0});
    const Superop b = build_liouvillian(pauli::x(), {}, {});
    CHECK(a.matrix() == b.matrix());
  }
  SUBCASE("short-time map is CP where w > 0") {
    const CanonicalModel m = spin_boson_model(kBench);
    const double dt = 1e-4;
    const Superop step(2, CMatrix(CMatrix::Identity(4, 4) + dt * build_liouvillian(m, 1.0).matrix()));
    CHECK(choi_spectrum(step).min_eigenvalue() > -10.0 * dt * dt);
  }
  SUBCASE("constant negative coupling breaks CP") {
    const Superop step(2, CMatrix(CMatrix::Identity(4, 4) +
                                  1e-3 * build_liouvillian(CMatrix::Zero(2, 2), {pauli::minus()},
                                                           {-1.0})
                                             .matrix()));
    CHECK(choi_spectrum(step).min_eigenvalue() < -5e-4);
  }
}

TEST_CASE("clipping") {
  const CanonicalModel m = spin_boson_model({0.0, 0.4});
  const double ts = std::numbers::pi / 0.8;
  CHECK_THROWS_AS(evaluate_couplings(m, ts), SingularCoupling);
  const auto w = evaluate_couplings(m, ts, {true, 1e3});
  CHECK(std::abs(w[0]) == 1e3);
  CHECK(evaluate_couplings(m, ts - 1e-4, {true, 50.0})[0] == 50.0);
  CHECK(evaluate_couplings(m, ts + 1e-4, {true, 50.0})[0] == -50.0);
}

TEST_CASE("zero detuning closed form") {
  const Eigen::Vector3d x(1.0, 0.0, 1.0);
  const CMatrix rho0 = exact_state_zero_detuning(0.0, 0.4, x);
  CHECK(std::abs(rho0(0, 0) - 0.5) < 1e-15);
  CHECK(std::abs(rho0(0, 1) - 0.5) < 1e-15);
  const CMatrix ground = exact_state_zero_detuning(std::numbers::pi / 0.8, 0.4, x);
  CHECK(max_abs(CMatrix(ground - CMatrix(pauli::minus() * pauli::plus()))) < 1e-15);
  for (double t : {0.4, 1.9, 3.0}) {
    const CMatrix r = exact_state_zero_detuning(t, 0.4, x);
    CHECK(std::abs(r.trace() - 1.0) < 1e-15);
    CHECK(hermitian_eigensystem(r).values(1) > -1e-14);
  }
  CHECK_THROWS_AS(exact_state_zero_detuning(0.0, 0.4, Eigen::Vector3d(1.0, 0.0, 0.0)),
                  ConfigError);
}

TEST_CASE("model invariants") {
  CHECK_THROWS_AS(spin_boson_model({0.4, 0.0}), ConfigError);
  const CanonicalModel m = spin_boson_model(kBench);
  CHECK(m.dim == 2);
  REQUIRE(m.channels.size() == 1);
  CHECK(m.channels[0].op == pauli::minus());
  REQUIRE(m.completion.size() == 1);
  const auto c = check_channel_sum<Complex>({m.channels[0].op, m.completion[0]});
  CHECK(c.proportional);
}
