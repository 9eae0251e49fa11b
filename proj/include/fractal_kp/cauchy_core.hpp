#pragma once

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/LU>

#include "fractal_kp/fractal_geometry.hpp"
#include "fractal_kp/types.hpp"

namespace fkp {

enum class PrincipalValue { None, OmitCoincident };

using IndexPair = std::pair<Index, Index>;

/// Relative coincidence tolerance; multiplied by the extent of the point cloud.
inline constexpr double kCoincideRelTol = 1e-12;

/// Dense Cauchy kernel K[j,k] = w_k / (t_j - s_k).
///
/// Under OmitCoincident the entries with |t_j - s_k| < tol are zero and listed
/// in `omitted`; this is the symmetric-omission principal value.
struct KernelMatrix {
  MatrixXc entries;
  PrincipalValue policy = PrincipalValue::None;
  std::vector<IndexPair> omitted;
};

/// Scalar-generic kernel assembly shared by the double-precision API and by the
/// extended-precision oracles in the tests.
template <typename Real>
ComplexMatrix<Real> cauchy_matrix(const ComplexVector<Real>& targets,
                                  const ComplexVector<Real>& sources, Real weight,
                                  PrincipalValue pv, Real tol,
                                  std::vector<IndexPair>* omitted = nullptr) {
  ComplexMatrix<Real> k(targets.size(), sources.size());
  for (Index col = 0; col < sources.size(); ++col) {
    for (Index row = 0; row < targets.size(); ++row) {
      const std::complex<Real> d = targets[row] - sources[col];
      if (std::abs(d) < tol) {
        if (pv == PrincipalValue::None) {
          throw CoincidenceError("target " + std::to_string(row) + " coincides with source " +
                                     std::to_string(col) + " (no principal-value policy)",
                                 row, col);
        }
        k(row, col) = std::complex<Real>(0);
        if (omitted != nullptr) omitted->emplace_back(row, col);
      } else {
        k(row, col) = weight / d;
      }
    }
  }
  return k;
}

/// Diagonal of the bounding box of both clouds; the scale for coincidence tests.
double point_cloud_extent(const VectorXc& a, const VectorXc& b);
double default_coincide_tol(const PointSet& targets, const PointSet& sources);

KernelMatrix assemble_kernel(const PointSet& targets, const PointSet& sources, PrincipalValue pv,
                             std::optional<double> coincide_tol = std::nullopt);

/// 1 + (1/pi) sum_k w_k c_k / (lambda - s_k). Throws DomainError at a pole.
Complex cauchy_eval(Complex lambda, const PointSet& sources, const VectorXc& coeffs,
                    std::optional<double> coincide_tol = std::nullopt);

struct SolveReport {
  double residual_norm = 0.0;       // ||AX - B||_max / ||B||_max
  double condition_estimate = 1.0;  // 1-norm estimate
  double pivot_growth = 1.0;        // max|U| / max|A|
};

/// Partial-pivoting LU kept alive so several right-hand sides reuse it.
class DenseFactorization {
 public:
  /// Throws SingularSystemError when a pivot falls below n * eps * max|A|.
  explicit DenseFactorization(MatrixXc a);

  MatrixXc solve(const MatrixXc& rhs) const;
  VectorXc solve(const VectorXc& rhs) const;

  /// Residual recomputed from the stored matrix, independent of the factors.
  SolveReport report(const MatrixXc& x, const MatrixXc& rhs) const;

  double condition_estimate() const { return condition_estimate_; }
  double pivot_growth() const { return pivot_growth_; }
  const MatrixXc& matrix() const { return a_; }
  Index size() const { return a_.rows(); }

 private:
  MatrixXc a_;
  Eigen::PartialPivLU<MatrixXc> lu_;
  double condition_estimate_ = 1.0;
  double pivot_growth_ = 1.0;
};

struct DenseSolution {
  MatrixXc x;
  SolveReport report;
};

DenseSolution solve_dense(const MatrixXc& a, const MatrixXc& b);

/// Relative residual max|AX - B| / max|B| (absolute when B vanishes).
double relative_residual(const MatrixXc& a, const MatrixXc& x, const MatrixXc& b);

}  // namespace fkp
