#ifndef UNRAVEL_GRID_HPP_
#define UNRAVEL_GRID_HPP_

#include <stdexcept>
#include <vector>

#include "unravel/errors.hpp"

namespace unravel {

struct TimeGrid {
  double t0 = 0.0;
  double t_final = 1.0;
  int n_steps = 1;

  TimeGrid() = default;
  TimeGrid(double start, double stop, int steps) : t0(start), t_final(stop), n_steps(steps) {
    if (!(stop > start) || steps < 1) throw ConfigError("invalid time grid");
  }

  double dt() const { return (t_final - t0) / n_steps; }
  double time(int k) const { return t0 + (t_final - t0) * double(k) / double(n_steps); }
  int size() const { return n_steps + 1; }

  std::vector<double> times() const {
    std::vector<double> t(size());
    for (int k = 0; k < size(); ++k) t[k] = time(k);
    return t;
  }
};

}  // namespace unravel

#endif  // UNRAVEL_GRID_HPP_
