#ifndef UNRAVEL_GAUSSIAN_ENGINE_HPP_
#define UNRAVEL_GAUSSIAN_ENGINE_HPP_

#include <array>
#include <cstdint>
#include <vector>

#include "unravel/ensemble.hpp"
#include "unravel/grid.hpp"
#include "unravel/model.hpp"
#include "unravel/rng.hpp"

namespace unravel {

struct InverseTemperature {
  enum class Kind { infinite, finite };
  Kind kind = Kind::infinite;
  double value = 0.0;

  static InverseTemperature vacuum() { return {}; }
  static InverseTemperature finite(double beta) { return {Kind::finite, beta}; }
  bool is_vacuum() const { return kind == Kind::infinite; }
};

struct BosonMode {
  double omega = 1.0;
  Complex g = 0.0;
};

struct BosonEnvironment {
  std::vector<BosonMode> modes;
  InverseTemperature beta;
  CMatrix L;
};

struct KernelValues {
  Complex f1, f2;
};

KernelValues kernel_functions(const BosonEnvironment& env, double tau);

struct KernelBlock {
  Complex k11, k12, k21, k22;
};

// Point values with 1_0^(0) = 0 and 1_0^(1) = 1 at equal times.
KernelBlock kernel_block(const BosonEnvironment& env, double t, double s);

struct KernelTable {
  std::vector<double> times;
  std::vector<Complex> f1, f2;  // lag (k - l) stored at index k - l + n
  CMatrix S, A, f;              // indexed by grid time pairs
  std::array<CMatrix, 4> K;     // K11, K12, K21, K22
};

KernelTable assemble_kernel_matrix(const BosonEnvironment& env, const TimeGrid& grid);

struct CovarianceOptions {
  double psd_tol = 1e-6;  // relative to the largest diagonal entry
};

// Covariances of the noise processes on the m grid times, component-minor:
// Z and R over zeta = (zeta_1, zeta_2), I over eta = (eta_1..eta_4).
struct AugmentedCovariance {
  int m = 0;
  CMatrix Z, R;
  CMatrix I;  // interference kernel I/(4i)
  Matrix<double> real_form;  // of zeta, through T
  Matrix<double> zeta_factor;
  Matrix<double> eta_factor;
  double min_eigenvalue = 0.0;
  double max_diagonal = 0.0;
  double epsilon = 0.0;
  bool floored = false;
};

AugmentedCovariance build_augmented_covariance(const KernelTable& table, const TimeGrid& grid,
                                               const CovarianceOptions& opt = {});

// Same validation and factorization for given blocks (Z, R: 2m x 2m, I: 4m x 4m).
AugmentedCovariance augmented_from_blocks(CMatrix Z, CMatrix R, CMatrix I,
                                          const CovarianceOptions& opt = {});

struct GaussianDraws {
  CMatrix zeta1, zeta2;  // m x 2
  CMatrix eta;           // m x 4
  CVector gamma1, gamma2;
};

std::vector<GaussianDraws> sample_processes(const AugmentedCovariance& cov, StreamRng& rng,
                                            std::size_t n_draws);

// Driving noises per grid cell, columns (x-left, x-right, y-left, y-right):
// phi sees kappa*(X u0 + Y u2), the dual sees conj(kappa)*(conj X u1 + conj Y u3),
// kappa = i/sqrt(2).
CMatrix driving_from_draws(const GaussianDraws& d, int n_cells);

enum class NoiseDiscretization { cell_average, point };

struct DrivingOptions {
  NoiseDiscretization discretization = NoiseDiscretization::cell_average;
  CMatrix extra_proper;  // optional 4n x 4n Hermitian PSD covariance added to eta
};

// Joint law of the driving noises with the complementary covariance implied by
// Z, R and I, realized with the smallest proper part: real covariance 2 J_+.
struct DrivingLaw {
  int n = 0;
  CMatrix complementary;  // 4n x 4n, index 4k + c
  Matrix<double> real_covariance;
  Matrix<double> factor;  // 8n x rank
  double proper_trace = 0.0;
};

// 4x4 complementary covariance of the driving noises at lag tau = t - s.
Eigen::Matrix4cd driving_kernel(const BosonEnvironment& env, double tau);

DrivingLaw build_driving_law(const BosonEnvironment& env, const TimeGrid& grid,
                             const DrivingOptions& opt = {});

CMatrix sample_driving(const DrivingLaw& law, StreamRng& rng);

struct DgsPair {
  std::vector<CVector> phi;
  std::vector<CVector> dual;  // rho = E[phi dual^T]
};

DgsPair run_dgs_pair(const MatrixFunction& h, const CMatrix& L, const CMatrix& drive,
                     const CVector& psi0, const TimeGrid& grid);
DgsPair run_dgs_pair(const MatrixFunction& h, const CMatrix& L, const GaussianDraws& draws,
                     const CVector& psi0, const TimeGrid& grid);

EnsembleEstimate estimate_dgs(const std::vector<DgsPair>& pairs, const std::vector<double>& times,
                              const std::vector<CMatrix>& observables);

struct DgsRunConfig {
  std::size_t n_traj = 1000;
  std::uint64_t seed = 1;
  DrivingOptions driving;
  std::vector<CMatrix> observables;
  int workers = 0;
};

struct DgsRunResult {
  EnsembleEstimate estimate;
  double proper_trace = 0.0;
  Index rank = 0;
};

DgsRunResult run_dgs_ensemble(const BosonEnvironment& env, const MatrixFunction& h,
                              const CVector& psi0, const TimeGrid& grid, const DgsRunConfig& cfg);

}  // namespace unravel

#endif  // UNRAVEL_GAUSSIAN_ENGINE_HPP_
