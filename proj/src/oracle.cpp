#include "unravel/oracle.hpp"

#include <cmath>
#include <string>

namespace unravel {

namespace {

void check_state(const CMatrix& rho) {
  if (rho.rows() != rho.cols()) throw ShapeError("density matrix must be square");
  if (std::abs(rho.trace() - Complex(1.0)) > 1e-10 || hermiticity_defect(rho) > 1e-10 ||
      hermitian_eigensystem(rho).values(rho.rows() - 1) < -1e-10)
    throw ConfigError("initial state is not a unit-trace positive operator");
}

// One RK4 step of dX/dt = L(t) X for X a vector or a matrix of stacked columns.
template <typename M>
void rk4_step(const CanonicalModel& m, double t, double h, const ClipPolicy& clip, M& x) {
  const CMatrix l0 = build_liouvillian(m, t, clip).matrix();
  const CMatrix l1 = build_liouvillian(m, t + 0.5 * h, clip).matrix();
  const CMatrix l2 = build_liouvillian(m, t + h, clip).matrix();
  const M k1 = l0 * x;
  const M k2 = l1 * (x + 0.5 * h * k1);
  const M k3 = l1 * (x + 0.5 * h * k2);
  const M k4 = l2 * (x + h * k3);
  x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

double expectation(const CMatrix& rho, const CMatrix& obs) {
  return std::real((rho * obs).trace());
}

std::vector<CMatrix> integrate_master(const CanonicalModel& m, const CMatrix& rho0,
                                      const TimeGrid& grid, const OracleOptions& opt) {
  check_state(rho0);
  std::vector<CMatrix> out;
  out.reserve(grid.size());
  out.push_back(rho0);
  CVector x = reshape(rho0);
  for (int k = 0; k < grid.n_steps; ++k) {
    const double t = grid.time(k);
    rk4_step(m, t, grid.time(k + 1) - t, opt.clip, x);
    CMatrix rho = unreshape(x);
    rho = (0.5 * (rho + rho.adjoint())).eval();
    if (std::abs(rho.trace() - Complex(1.0)) > opt.trace_tol)
      throw StepTooCoarse("step size too coarse: trace drift at t=" +
                          std::to_string(grid.time(k + 1)));
    x = reshape(rho);
    out.push_back(std::move(rho));
  }
  return out;
}

FlowReport propagate_flow(const CanonicalModel& m, const TimeGrid& grid,
                          const OracleOptions& opt) {
  const Index d = m.dim;
  const RVector ones = reshape(CMatrix::Identity(d, d)).real();
  FlowReport rep;
  CMatrix f = CMatrix::Identity(d * d, d * d);
  for (int k = 0; k <= grid.n_steps; ++k) {
    if (k > 0) {
      const double t = grid.time(k - 1);
      rk4_step(m, t, grid.time(k) - t, opt.clip, f);
      const double defect = max_abs(ones.transpose().cast<Complex>() * f -
                                    ones.transpose().cast<Complex>());
      if (defect > opt.trace_tol)
        throw StepTooCoarse("step size too coarse: trace defect at t=" +
                            std::to_string(grid.time(k)));
    }
    Superop s(d, f);
    const auto spec = choi_spectrum(s, opt.tol);
    rep.times.push_back(grid.time(k));
    rep.choi_spectra.push_back(spec.eigenvalues);
    rep.cp_flags.push_back(spec.cp);
    if (opt.with_kraus) rep.kraus.push_back(kraus_decompose(s, opt.tol));
    rep.flows.push_back(std::move(s));
  }
  return rep;
}

}  // namespace unravel
