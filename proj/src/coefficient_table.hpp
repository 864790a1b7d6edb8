#ifndef UNRAVEL_COEFFICIENT_TABLE_HPP_
#define UNRAVEL_COEFFICIENT_TABLE_HPP_

#include <vector>

#include "unravel/grid.hpp"
#include "unravel/model.hpp"

namespace unravel::detail {

// Couplings sampled at the half-grid t0 + j*dt/2, j = 0..2n. Between samples a
// cell's values are the quadratic through its three samples.
struct CouplingTable {
  TimeGrid grid;
  int n_channels = 0;
  std::vector<double> w;  // [j * n_channels + l]
  std::size_t clipped = 0;

  double at(int j, int l) const { return w[std::size_t(j) * n_channels + l]; }
};

inline CouplingTable tabulate_couplings(const std::vector<ScalarFunction>& couplings,
                                        const TimeGrid& grid, const ClipPolicy& clip) {
  CouplingTable tab;
  tab.grid = grid;
  tab.n_channels = int(couplings.size());
  const int n_half = 2 * grid.n_steps + 1;
  tab.w.resize(std::size_t(n_half) * tab.n_channels);
  for (int j = 0; j < n_half; ++j) {
    const double t = grid.t0 + (grid.t_final - grid.t0) * double(j) / double(2 * grid.n_steps);
    for (int l = 0; l < tab.n_channels; ++l) {
      double v;
      try {
        v = couplings[l](t);
        if (clip.enabled && std::abs(v) > clip.w_max) {
          v = v > 0 ? clip.w_max : -clip.w_max;
          ++tab.clipped;
        }
      } catch (const SingularCoupling& e) {
        if (!clip.enabled) throw;
        v = e.sign * clip.w_max;
        ++tab.clipped;
      }
      tab.w[std::size_t(j) * tab.n_channels + l] = v;
    }
  }
  return tab;
}

// Quadratic Lagrange weights through u = 0, 1/2, 1.
inline void lagrange3(double u, double& a, double& b, double& c) {
  a = 2.0 * (u - 0.5) * (u - 1.0);
  b = -4.0 * u * (u - 1.0);
  c = 2.0 * u * (u - 0.5);
}

}  // namespace unravel::detail

#endif  // UNRAVEL_COEFFICIENT_TABLE_HPP_
