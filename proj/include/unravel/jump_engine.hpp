#ifndef UNRAVEL_JUMP_ENGINE_HPP_
#define UNRAVEL_JUMP_ENGINE_HPP_

#include <cstdint>
#include <vector>

#include "unravel/ensemble.hpp"
#include "unravel/grid.hpp"
#include "unravel/model.hpp"
#include "unravel/rng.hpp"

namespace unravel {

struct RatePolicy {
  double c0 = 0.5;
  bool c0_auto = false;  // c0 = 0.5 * max_t |w| on the grid
  double r_max = 1e3;
  double w_max = 1e3;  // coupling clip
};

struct Rates {
  double c = 0.0;
  std::vector<double> r;
};

Rates choose_rates(const std::vector<double>& w, const RatePolicy& policy);

struct CompletedChannel {
  CMatrix op;
  ScalarFunction coupling;
  bool completion = false;
};

struct CompletedChannelSet {
  std::vector<CompletedChannel> channels;
  double g = 0.0;
};

// Appends channels with zero coupling so that sum L^dag L = g*1. Explicit
// completion operators are used when given, otherwise D = g*1 - sum L^dag L is
// factored into projectors sqrt(lambda_k) u_k u_k^dag.
CompletedChannelSet complete_channels(const std::vector<Channel>& channels, Index d,
                                      const std::vector<CMatrix>& explicit_ops = {},
                                      double uplift = 0.0);
CompletedChannelSet complete_channels(const CanonicalModel& m);

struct Jump {
  double time = 0.0;
  int channel = 0;
};

struct TrajectoryPath {
  std::vector<double> times;
  std::vector<CVector> psi;
  std::vector<double> mu;
  std::vector<Jump> jumps;
};

enum class JumpSampling { waiting_time, bernoulli };

struct JumpOptions {
  RatePolicy policy;
  JumpSampling sampling = JumpSampling::waiting_time;
  double p_max = 0.1;  // Bernoulli substep cap
};

TrajectoryPath run_trajectory(const CompletedChannelSet& set, const MatrixFunction& h,
                              const CVector& psi0, const TimeGrid& grid,
                              const JumpOptions& opt, StreamRng& rng);

EnsembleEstimate estimate_state(const std::vector<TrajectoryPath>& paths, EstimatorKind kind,
                                const std::vector<CMatrix>& observables);

struct JumpRunConfig {
  std::size_t n_traj = 1000;
  std::uint64_t seed = 1;
  JumpOptions options;
  EstimatorKind estimator = EstimatorKind::normalized;
  std::vector<CMatrix> observables;  // defaults when empty
  int workers = 0;                   // 0: worker_count()
};

struct JumpRunDiagnostics {
  double c0 = 0.0;  // resolved margin
  double g = 0.0;
  double max_norm_defect = 0.0;           // stored states
  double max_factorization_defect = 0.0;  // |mu / (exp(g int c) prod w/r) - 1|
  std::size_t total_jumps = 0;
  std::size_t absorbed_paths = 0;  // weight exactly zero at t_final
  std::size_t clipped_evaluations = 0;
  std::size_t capped_rates = 0;
};

struct JumpRunResult {
  EnsembleEstimate estimate;
  JumpRunDiagnostics diagnostics;
};

JumpRunResult run_jump_ensemble(const CanonicalModel& m, const CVector& psi0,
                                const TimeGrid& grid, const JumpRunConfig& cfg);

}  // namespace unravel

#endif  // UNRAVEL_JUMP_ENGINE_HPP_
