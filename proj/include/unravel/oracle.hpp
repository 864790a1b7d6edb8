#ifndef UNRAVEL_ORACLE_HPP_
#define UNRAVEL_ORACLE_HPP_

#include <optional>
#include <vector>

#include "unravel/grid.hpp"
#include "unravel/model.hpp"

namespace unravel {

struct OracleOptions {
  ClipPolicy clip;  // disabled: a singular coupling aborts the integration
  double trace_tol = 1e-6;
  bool with_kraus = false;
  Tolerances tol;
};

struct FlowReport {
  std::vector<double> times;
  std::vector<Superop> flows;
  std::vector<RVector> choi_spectra;
  std::vector<bool> cp_flags;
  std::vector<SignedKrausSet<Complex>> kraus;  // empty unless requested
};

std::vector<CMatrix> integrate_master(const CanonicalModel& m, const CMatrix& rho0,
                                      const TimeGrid& grid, const OracleOptions& opt = {});

FlowReport propagate_flow(const CanonicalModel& m, const TimeGrid& grid,
                          const OracleOptions& opt = {});

double expectation(const CMatrix& rho, const CMatrix& obs);

}  // namespace unravel

#endif  // UNRAVEL_ORACLE_HPP_
