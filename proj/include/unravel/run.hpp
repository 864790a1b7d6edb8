#ifndef UNRAVEL_RUN_HPP_
#define UNRAVEL_RUN_HPP_

#include <ostream>
#include <string>
#include <vector>

#include "unravel/config.hpp"

namespace unravel {

inline constexpr const char* kVersion = "0.1.0";

struct RunOutcome {
  std::vector<std::string> files;
  Json manifest;
};

// Writes <prefix>.csv, <prefix>_manifest.json and, for engine=compare,
// <prefix>_compare.csv into out_dir. workers = 0 uses worker_count().
RunOutcome execute_run(const RunConfig& cfg, const std::string& out_dir, int workers = 0);

struct CpReport {
  std::vector<double> times;
  std::vector<double> min_choi;
  std::vector<bool> cp;
  std::vector<std::vector<double>> couplings;
};

CpReport check_cp(const RunConfig& cfg);
void write_cp_report(std::ostream& out, const CpReport& r);

}  // namespace unravel

#endif  // UNRAVEL_RUN_HPP_
