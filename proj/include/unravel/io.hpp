#ifndef UNRAVEL_IO_HPP_
#define UNRAVEL_IO_HPP_

#include <ostream>
#include <string>
#include <vector>

#include "unravel/ensemble.hpp"

namespace unravel {

// 17 significant digits, enough to round-trip a double.
std::string format_number(double x);

// SHA-1 of "blob <size>\0<content>", lowercase hex.
std::string git_blob_hash(const std::string& content);

// t, observables, trace, min_choi
void write_oracle_csv(std::ostream& out, const std::vector<double>& times,
                      const std::vector<CMatrix>& states, const std::vector<std::string>& names,
                      const std::vector<CMatrix>& observables, const std::vector<double>& min_choi);

// t, observable means, se_<name>, E_mu, SE_mu, n_jumps_mean
void write_estimate_csv(std::ostream& out, const EnsembleEstimate& est,
                        const std::vector<std::string>& names);

// z = (stochastic - oracle) / se; zero when both the difference and se vanish.
double z_score(double estimate, double reference, double se);

// t, then per observable: oracle_<name>, <kind>_<name>, se_<name>, z_<name>
void write_compare_csv(std::ostream& out, const EnsembleEstimate& est,
                       const std::vector<CMatrix>& oracle_states,
                       const std::vector<std::string>& names);

}  // namespace unravel

#endif  // UNRAVEL_IO_HPP_
