// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace pmodel {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;

inline constexpr cplx I_UNIT{0.0, 1.0};
inline constexpr double PI = 3.14159265358979323846;

enum class ErrorKind {
  Domain,
  ConstantViolation,
  NearSingular,
  Infeasible,
  Geometry,
  SearchFailure,
  Quadrature,
  Spectral,
  Symmetry,
  Alignment,
  NotInDomain,
  InequalityViolation,
  Config,
  Io,
};

const char* to_string(ErrorKind kind);

// Every failure raised by the library. `value` carries the numeric witness
// when one exists (achieved residual, violating sup, ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what, double value = 0.0)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), value_(value) {}

  ErrorKind kind() const { return kind_; }
  double value() const { return value_; }

 private:
  ErrorKind kind_;
  double value_;
};

// Spectral norm of a dense complex matrix.
double opnorm(const Mat& m);

// Smallest singular value.
double smin(const Mat& m);

}  // namespace pmodel
