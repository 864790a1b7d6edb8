#include "unravel/model.hpp"

#include <algorithm>
#include <cmath>

namespace unravel {

double evaluate_coupling(const Channel& c, double t, const ClipPolicy& clip) {
  if (!clip.enabled) return c.coupling(t);
  try {
    return std::clamp(c.coupling(t), -clip.w_max, clip.w_max);
  } catch (const SingularCoupling& e) {
    return e.sign * clip.w_max;
  }
}

std::vector<double> evaluate_couplings(const CanonicalModel& m, double t,
                                       const ClipPolicy& clip) {
  std::vector<double> w(m.channels.size());
  for (std::size_t l = 0; l < w.size(); ++l) w[l] = evaluate_coupling(m.channels[l], t, clip);
  return w;
}

Superop build_liouvillian(const CMatrix& h, const std::vector<CMatrix>& ops,
                          const std::vector<double>& w) {
  const Index d = h.rows();
  const CMatrix id = CMatrix::Identity(d, d);
  CMatrix l = Complex(0, -1) * (sandwich(h, id) - sandwich(id, h));
  for (std::size_t k = 0; k < ops.size(); ++k) {
    if (w[k] == 0.0) continue;
    const CMatrix& op = ops[k];
    const CMatrix ldl = op.adjoint() * op;
    l += w[k] * (sandwich(op, op.adjoint()) - 0.5 * (sandwich(ldl, id) + sandwich(id, ldl)));
  }
  return {d, l};
}

Superop build_liouvillian(const CanonicalModel& m, double t, const ClipPolicy& clip) {
  std::vector<CMatrix> ops;
  for (const auto& c : m.channels) ops.push_back(c.op);
  return build_liouvillian(m.hamiltonian(t), ops, evaluate_couplings(m, t, clip));
}

double SpinBosonParams::omega() const { return std::sqrt(delta * delta + 4.0 * g * g); }

Complex spin_boson_gamma(double t, const SpinBosonParams& p) {
  const double om = p.omega();
  return std::exp(Complex(0, p.delta * t)) *
         Complex(std::cos(0.5 * om * t), -(p.delta / om) * std::sin(0.5 * om * t));
}

namespace {

double denominator(double t, const SpinBosonParams& p) {
  return p.delta * p.delta + 2.0 * p.g * p.g * (1.0 + std::cos(p.omega() * t));
}

}  // namespace

double spin_boson_w(double t, const SpinBosonParams& p) {
  const double om = p.omega();
  const double num = 2.0 * p.g * p.g * om * std::sin(om * t);
  const double den = denominator(t, p);
  if (den < kDenTol) throw SingularCoupling(t, num);
  return num / den;
}

// Im(d/dt ln gamma); vanishes identically at zero detuning.
double spin_boson_h(double t, const SpinBosonParams& p) {
  const double om = p.omega();
  const double num = p.delta * (p.delta * p.delta + 4.0 * p.g * p.g * std::cos(om * t));
  if (num == 0.0) return 0.0;
  return num / (2.0 * std::max(denominator(t, p), kDenTol));
}

SpinBosonCoefficients spin_boson_coefficients(double t, const SpinBosonParams& p) {
  return {spin_boson_gamma(t, p), spin_boson_w(t, p), spin_boson_h(t, p)};
}

CanonicalModel spin_boson_model(const SpinBosonParams& p) {
  if (!(p.g > 0.0)) throw ConfigError("spin-boson coupling g must be positive");
  CanonicalModel m;
  m.dim = 2;
  const CMatrix proj = pauli::plus() * pauli::minus();
  m.hamiltonian = [p, proj](double t) -> CMatrix { return -spin_boson_h(t, p) * proj; };
  m.channels.push_back({pauli::minus(), [p](double t) { return spin_boson_w(t, p); }});
  m.completion.push_back(pauli::plus());
  m.label = "spin_boson";
  return m;
}

Superop two_level_flow(double alpha, double beta, Complex gamma) {
  CMatrix f = CMatrix::Zero(4, 4);
  f(0, 0) = beta;
  f(0, 3) = 1.0 - alpha;
  f(1, 1) = gamma;
  f(2, 2) = std::conj(gamma);
  f(3, 0) = 1.0 - beta;
  f(3, 3) = alpha;
  return {2, f};
}

Superop spin_boson_flow(double t, const SpinBosonParams& p) {
  const Complex gamma = spin_boson_gamma(t, p);
  return two_level_flow(1.0, std::norm(gamma), gamma);
}

Superop spin_boson_lab_flow(double t, double omega0, const SpinBosonParams& p) {
  const Complex gamma = spin_boson_gamma(t, p);
  const Complex c = std::exp(Complex(0.0, (0.5 * p.delta - omega0) * t)) * std::conj(gamma);
  return two_level_flow(1.0, std::norm(gamma), c);
}

CMatrix exact_state_zero_detuning(double t, double g, const Eigen::Vector3d& x) {
  const CMatrix id = CMatrix::Identity(2, 2);
  auto state = [&](double c) -> CMatrix {
    return 0.5 * (id - pauli::z()) + 0.5 * c * (x(0) * pauli::x() + x(1) * pauli::y()) +
           0.5 * c * c * x(2) * pauli::z();
  };
  if (hermitian_eigensystem(state(1.0)).values(1) < -1e-12)
    throw ConfigError("initial vector does not define a state");
  return state(std::cos(g * t));
}

}  // namespace unravel
