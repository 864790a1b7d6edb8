#ifndef UNRAVEL_OSTENSIBLE_ENGINE_HPP_
#define UNRAVEL_OSTENSIBLE_ENGINE_HPP_

#include "unravel/jump_engine.hpp"

namespace unravel {

struct OstensiblePath {
  std::vector<double> times;
  std::vector<CVector> phi;
  std::vector<double> lambda;
  std::vector<Jump> jumps;
};

// A = -iH - sum (w L^dag L - r)/2
CMatrix drift_matrix(const CMatrix& h, const std::vector<CMatrix>& ops,
                     const std::vector<double>& w, const std::vector<double>& r);
CMatrix drift_matrix(const CanonicalModel& m, double t, const std::vector<double>& r,
                     const ClipPolicy& clip = {});

OstensiblePath run_ostensible_trajectory(const CanonicalModel& m, const CVector& psi0,
                                         const TimeGrid& grid, const RatePolicy& policy,
                                         StreamRng& rng);

EnsembleEstimate estimate_ostensible(const std::vector<OstensiblePath>& paths,
                                     const std::vector<CMatrix>& observables);

struct OstensibleRunConfig {
  std::size_t n_traj = 1000;
  std::uint64_t seed = 1;
  RatePolicy policy;
  std::vector<CMatrix> observables;
  int workers = 0;
};

struct OstensibleRunResult {
  EnsembleEstimate estimate;
  double c0 = 0.0;
  std::size_t total_jumps = 0;
  std::size_t clipped_evaluations = 0;
  bool horizon_warning = false;  // SE of the trace above 0.2 somewhere
};

OstensibleRunResult run_ostensible_ensemble(const CanonicalModel& m, const CVector& psi0,
                                            const TimeGrid& grid, const OstensibleRunConfig& cfg);

}  // namespace unravel

#endif  // UNRAVEL_OSTENSIBLE_ENGINE_HPP_
