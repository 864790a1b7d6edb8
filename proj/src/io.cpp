#include "unravel/io.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include <openssl/sha.h>

#include "unravel/oracle.hpp"

namespace unravel {

std::string format_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string git_blob_hash(const std::string& content) {
  std::string blob = "blob " + std::to_string(content.size());
  blob.push_back('\0');
  blob += content;
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(blob.data()), blob.size(), digest);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned char c : digest) {
    out.push_back(hex[c >> 4]);
    out.push_back(hex[c & 15]);
  }
  return out;
}

void write_oracle_csv(std::ostream& out, const std::vector<double>& times,
                      const std::vector<CMatrix>& states, const std::vector<std::string>& names,
                      const std::vector<CMatrix>& observables, const std::vector<double>& min_choi) {
  out << "t";
  for (const auto& n : names) out << ',' << n;
  out << ",trace,min_choi\n";
  for (std::size_t k = 0; k < times.size(); ++k) {
    out << format_number(times[k]);
    for (const auto& o : observables) out << ',' << format_number(expectation(states[k], o));
    out << ',' << format_number(states[k].trace().real()) << ',' << format_number(min_choi[k])
        << '\n';
  }
}

void write_estimate_csv(std::ostream& out, const EnsembleEstimate& est,
                        const std::vector<std::string>& names) {
  out << "t";
  for (const auto& n : names) out << ',' << n;
  for (const auto& n : names) out << ",se_" << n;
  out << ",E_mu,SE_mu,n_jumps_mean\n";
  for (std::size_t k = 0; k < est.times.size(); ++k) {
    out << format_number(est.times[k]);
    for (Index o = 0; o < est.obs_mean.cols(); ++o) out << ',' << format_number(est.obs_mean(k, o));
    for (Index o = 0; o < est.obs_se.cols(); ++o) out << ',' << format_number(est.obs_se(k, o));
    out << ',' << format_number(est.mu_mean(k)) << ',' << format_number(est.mu_se(k)) << ','
        << format_number(est.jumps_mean(k)) << '\n';
  }
}

double z_score(double estimate, double reference, double se) {
  const double diff = estimate - reference;
  if (se > 0.0) return diff / se;
  return std::abs(diff) <= 1e-12 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
}

void write_compare_csv(std::ostream& out, const EnsembleEstimate& est,
                       const std::vector<CMatrix>& oracle_states,
                       const std::vector<std::string>& names) {
  const std::string kind = to_string(est.kind);
  out << "t";
  for (const auto& n : names) out << ",oracle_" << n << ',' << kind << '_' << n << ",se_" << n << ",z_" << n;
  out << '\n';
  for (std::size_t k = 0; k < est.times.size(); ++k) {
    out << format_number(est.times[k]);
    for (std::size_t o = 0; o < names.size(); ++o) {
      const double ref = expectation(oracle_states[k], est.observables[o]);
      const double m = est.obs_mean(k, o), se = est.obs_se(k, o);
      out << ',' << format_number(ref) << ',' << format_number(m) << ',' << format_number(se)
          << ',' << format_number(z_score(m, ref, se));
    }
    out << '\n';
  }
}

}  // namespace unravel
