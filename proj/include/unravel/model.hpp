#ifndef UNRAVEL_MODEL_HPP_
#define UNRAVEL_MODEL_HPP_

#include <functional>
#include <string>
#include <vector>

#include "unravel/qops.hpp"

namespace unravel {

using ScalarFunction = std::function<double(double)>;
using MatrixFunction = std::function<CMatrix(double)>;

inline constexpr double kDenTol = 1e-12;

struct Channel {
  CMatrix op;
  ScalarFunction coupling;  // may throw SingularCoupling
};

struct CanonicalModel {
  Index dim = 0;
  MatrixFunction hamiltonian;
  std::vector<Channel> channels;
  // Optional operators that complete sum L^dag L to g*1; generic factorization otherwise.
  std::vector<CMatrix> completion;
  std::string label;
};

// Caps |w| at w_max; a divergence is replaced by the cap with the sign of the
// approaching branch.
struct ClipPolicy {
  bool enabled = false;
  double w_max = 1e3;
};

double evaluate_coupling(const Channel& c, double t, const ClipPolicy& clip = {});
std::vector<double> evaluate_couplings(const CanonicalModel& m, double t,
                                       const ClipPolicy& clip = {});

Superop build_liouvillian(const CanonicalModel& m, double t, const ClipPolicy& clip = {});
Superop build_liouvillian(const CMatrix& h, const std::vector<CMatrix>& ops,
                          const std::vector<double>& w);

struct SpinBosonParams {
  double delta = 0.4;
  double g = 0.4;
  double omega() const;
};

struct SpinBosonCoefficients {
  Complex gamma;
  double w = 0.0;
  double h = 0.0;
};

Complex spin_boson_gamma(double t, const SpinBosonParams& p);
double spin_boson_w(double t, const SpinBosonParams& p);
double spin_boson_h(double t, const SpinBosonParams& p);
SpinBosonCoefficients spin_boson_coefficients(double t, const SpinBosonParams& p);

// H(t) = -h_t sigma_+ sigma_-, channel (sigma_-, w_t), completion sigma_+.
CanonicalModel spin_boson_model(const SpinBosonParams& p);

// Trace-preserving two-level flow with populations rho11 -> beta rho11 + (1-alpha) rho22.
Superop two_level_flow(double alpha, double beta, Complex gamma);
Superop spin_boson_flow(double t, const SpinBosonParams& p);

// Same flow in the lab frame of H = omega0 sigma_+ sigma_- coupled to a vacuum mode
// at omega0 + delta through L = sigma_-.
Superop spin_boson_lab_flow(double t, double omega0, const SpinBosonParams& p);

// rho_0 = (1 - sigma_3)/2 + x.sigma/2; throws ConfigError if rho_0 is not a state.
CMatrix exact_state_zero_detuning(double t, double g, const Eigen::Vector3d& x);

}  // namespace unravel

#endif  // UNRAVEL_MODEL_HPP_
