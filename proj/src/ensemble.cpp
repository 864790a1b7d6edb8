#include "unravel/ensemble.hpp"

#include <cmath>

#include "unravel/errors.hpp"

namespace unravel {

std::string to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::raw: return "raw";
    case EstimatorKind::normalized: return "normalized";
    case EstimatorKind::ostensible: return "ostensible";
    case EstimatorKind::dgs: return "dgs";
  }
  return "raw";
}

EstimatorKind estimator_from_string(const std::string& s) {
  if (s == "raw") return EstimatorKind::raw;
  if (s == "normalized") return EstimatorKind::normalized;
  if (s == "ostensible") return EstimatorKind::ostensible;
  if (s == "dgs") return EstimatorKind::dgs;
  throw ConfigError("unknown estimator '" + s + "'");
}

EnsembleAccumulator::EnsembleAccumulator(int n_times, Index dim,
                                         std::vector<CMatrix> observables)
    : observables_(std::move(observables)),
      sum_w_(n_times, 0.0),
      sum_w2_(n_times, 0.0),
      jumps_(n_times, 0.0),
      rho_(n_times, CMatrix::Zero(dim, dim)),
      plus_(n_times, CMatrix::Zero(dim, dim)),
      minus_(n_times, CMatrix::Zero(dim, dim)),
      moments_(std::size_t(n_times) * 3 * (observables_.size() + 1), 0.0) {}

void EnsembleAccumulator::merge(const EnsembleAccumulator& o) {
  n_ += o.n_;
  for (std::size_t k = 0; k < sum_w_.size(); ++k) {
    sum_w_[k] += o.sum_w_[k];
    sum_w2_[k] += o.sum_w2_[k];
    jumps_[k] += o.jumps_[k];
    rho_[k] += o.rho_[k];
    plus_[k] += o.plus_[k];
    minus_[k] += o.minus_[k];
  }
  for (std::size_t i = 0; i < moments_.size(); ++i) moments_[i] += o.moments_[i];
}

EnsembleEstimate EnsembleAccumulator::finalize(EstimatorKind kind,
                                               const std::vector<double>& times) const {
  const double n = double(n_);
  if (n_ < 2) throw ConfigError("at least two paths are required");
  const int nt = n_times();
  const std::size_t m = observables_.size();
  EnsembleEstimate e;
  e.kind = kind;
  e.times = times;
  e.observables = observables_;
  e.n_trajectories = n_;
  e.obs_mean.resize(nt, Index(m));
  e.obs_se.resize(nt, Index(m));
  e.trace_mean.resize(nt);
  e.trace_se.resize(nt);
  e.mu_mean.resize(nt);
  e.mu_se.resize(nt);
  e.jumps_mean.resize(nt);
  const bool normalized = kind == EstimatorKind::normalized;
  for (int k = 0; k < nt; ++k) {
    const double sw = sum_w_[k];
    const double mu = sw / n;
    e.mu_mean(k) = mu;
    e.mu_se(k) = std::sqrt(std::max(0.0, (sum_w2_[k] / n - mu * mu) / (n - 1.0)));
    e.jumps_mean(k) = jumps_[k] / n;
    e.rho_plus.push_back(plus_[k] / n);
    e.rho_minus.push_back(minus_[k] / n);
    if (normalized && (sw == 0.0 || !std::isfinite(sw)))
      throw DegenerateEnsemble("degenerate ensemble: sum of weights vanishes at t=" +
                               std::to_string(times[k]));
    e.rho.push_back(normalized ? CMatrix(rho_[k] / sw) : CMatrix(rho_[k] / n));
    const double* row = &moments_[std::size_t(k) * 3 * (m + 1)];
    for (std::size_t j = 0; j <= m; ++j) {
      const double s1 = row[3 * j], s2 = row[3 * j + 1], s12 = row[3 * j + 2];
      double mean, se;
      if (normalized) {
        mean = s1 / sw;
        se = std::sqrt(std::max(0.0, s2 - 2.0 * mean * s12 + mean * mean * sum_w2_[k])) /
             std::abs(sw);
      } else {
        mean = s1 / n;
        se = std::sqrt(std::max(0.0, (s2 / n - mean * mean) / (n - 1.0)));
      }
      if (j < m) {
        e.obs_mean(k, Index(j)) = mean;
        e.obs_se(k, Index(j)) = se;
      } else {
        e.trace_mean(k) = mean;
        e.trace_se(k) = se;
      }
    }
  }
  return e;
}

}  // namespace unravel
