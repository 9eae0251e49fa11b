#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace fkp {

using Complex = std::complex<double>;
using Index = Eigen::Index;

template <typename Real>
using ComplexVector = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, 1>;
template <typename Real>
using ComplexMatrix = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;

using VectorXc = Eigen::VectorXcd;
using MatrixXc = Eigen::MatrixXcd;
using VectorXd = Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846264338327950288;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (bad eps, degenerate triangle, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Two point families that must be disjoint share a point (within tolerance).
class CoincidenceError : public Error {
 public:
  CoincidenceError(const std::string& what, Index target, Index source)
      : Error(what), target_(target), source_(source) {}
  Index target() const { return target_; }
  Index source() const { return source_; }

 private:
  Index target_;
  Index source_;
};

/// The dense system is numerically singular; carries the condition estimate.
class SingularSystemError : public Error {
 public:
  SingularSystemError(const std::string& what, double condition_estimate)
      : Error(what), condition_estimate_(condition_estimate) {}
  double condition_estimate() const { return condition_estimate_; }

 private:
  double condition_estimate_;
};

}  // namespace fkp
