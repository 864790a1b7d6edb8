#ifndef UNRAVEL_ENSEMBLE_HPP_
#define UNRAVEL_ENSEMBLE_HPP_

#include <string>
#include <vector>

#include "unravel/qops.hpp"

namespace unravel {

enum class EstimatorKind { raw, normalized, ostensible, dgs };

std::string to_string(EstimatorKind k);
EstimatorKind estimator_from_string(const std::string& s);

struct EnsembleEstimate {
  EstimatorKind kind = EstimatorKind::raw;
  std::vector<double> times;
  std::vector<CMatrix> rho;
  std::vector<CMatrix> rho_plus;   // E[mu+ P], raw scaling
  std::vector<CMatrix> rho_minus;  // E[mu- P], raw scaling
  std::vector<CMatrix> observables;
  Matrix<double> obs_mean;  // times x observables, Re Tr(rho O)
  Matrix<double> obs_se;
  RVector trace_mean, trace_se;
  RVector mu_mean, mu_se;
  RVector jumps_mean;
  std::size_t n_trajectories = 0;
};

// Per-time sums over paths of weight * P with P = a b^dag.
class EnsembleAccumulator {
 public:
  EnsembleAccumulator() = default;
  EnsembleAccumulator(int n_times, Index dim, std::vector<CMatrix> observables);

  template <typename DA, typename DB>
  void add(int k, double weight, const Eigen::MatrixBase<DA>& a,
           const Eigen::MatrixBase<DB>& b, int jumps = 0) {
    sum_w_[k] += weight;
    sum_w2_[k] += weight * weight;
    jumps_[k] += jumps;
    if (weight == 0.0) return;
    const Index d = a.size();
    CMatrix& sign_part = weight > 0 ? plus_[k] : minus_[k];
    const double aw = std::abs(weight);
    for (Index i = 0; i < d; ++i) {
      for (Index j = 0; j < d; ++j) {
        const Complex p = a(i) * std::conj(b(j));
        rho_[k](i, j) += weight * p;
        sign_part(i, j) += aw * p;
      }
    }
    const std::size_t m = observables_.size();
    double* row = &moments_[std::size_t(k) * 3 * (m + 1)];
    for (std::size_t j = 0; j <= m; ++j) {
      Complex acc = 0.0;
      if (j < m) {
        const CMatrix& o = observables_[j];
        for (Index r = 0; r < d; ++r)
          for (Index c = 0; c < d; ++c) acc += std::conj(b(r)) * o(r, c) * a(c);
      } else {
        for (Index r = 0; r < d; ++r) acc += std::conj(b(r)) * a(r);
      }
      const double o = std::real(acc);
      row[3 * j] += weight * o;
      row[3 * j + 1] += weight * weight * o * o;
      row[3 * j + 2] += weight * weight * o;
    }
  }

  void finish_path() { ++n_; }
  void merge(const EnsembleAccumulator& other);

  std::size_t n_paths() const { return n_; }
  int n_times() const { return int(sum_w_.size()); }

  EnsembleEstimate finalize(EstimatorKind kind, const std::vector<double>& times) const;

 private:
  std::size_t n_ = 0;
  std::vector<CMatrix> observables_;
  std::vector<double> sum_w_, sum_w2_, jumps_;
  std::vector<CMatrix> rho_, plus_, minus_;
  std::vector<double> moments_;  // per time, per observable (+trace): sum w o, w^2 o^2, w^2 o
};

}  // namespace unravel

#endif  // UNRAVEL_ENSEMBLE_HPP_
