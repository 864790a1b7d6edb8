#ifndef UNRAVEL_ERRORS_HPP_
#define UNRAVEL_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace unravel {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

// Maps to exit code 3.
struct NumericalError : Error {
  using Error::Error;
};

struct SingularCoupling : NumericalError {
  SingularCoupling(double time, double numerator)
      : NumericalError("singular coupling at t=" + std::to_string(time)),
        t(time),
        sign(numerator < 0.0 ? -1.0 : 1.0) {}
  double t;
  double sign;  // sign of the coupling just before the divergence
};

struct NotSelfAdjointPreserving : NumericalError {
  using NumericalError::NumericalError;
};

struct StepTooCoarse : NumericalError {
  using NumericalError::NumericalError;
};

struct CovarianceNotPsd : NumericalError {
  CovarianceNotPsd(double min_eig, double max_diag)
      : NumericalError("covariance not approximately PSD: min eigenvalue " +
                       std::to_string(min_eig) + ", max diagonal " +
                       std::to_string(max_diag)),
        min_eigenvalue(min_eig),
        max_diagonal(max_diag) {}
  double min_eigenvalue;
  double max_diagonal;
};

struct BlowUp : NumericalError {
  using NumericalError::NumericalError;
};

// Maps to exit code 4.
struct DegenerateEnsemble : Error {
  using Error::Error;
};

}  // namespace unravel

#endif  // UNRAVEL_ERRORS_HPP_
