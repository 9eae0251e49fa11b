#include "fractal_kp/cauchy_core.hpp"

#include <algorithm>
#include <limits>

#include <fmt/format.h>

namespace fkp {

double point_cloud_extent(const VectorXc& a, const VectorXc& b) {
  double lo_re = std::numeric_limits<double>::infinity();
  double lo_im = lo_re;
  double hi_re = -lo_re;
  double hi_im = -lo_re;
  for (const VectorXc* v : {&a, &b}) {
    for (Index i = 0; i < v->size(); ++i) {
      lo_re = std::min(lo_re, (*v)[i].real());
      hi_re = std::max(hi_re, (*v)[i].real());
      lo_im = std::min(lo_im, (*v)[i].imag());
      hi_im = std::max(hi_im, (*v)[i].imag());
    }
  }
  return std::hypot(hi_re - lo_re, hi_im - lo_im);
}

double default_coincide_tol(const PointSet& targets, const PointSet& sources) {
  const double extent = point_cloud_extent(targets.nodes(), sources.nodes());
  // A single point has no extent; fall back to an absolute scale.
  return kCoincideRelTol * (extent > 0.0 ? extent : 1.0);
}

KernelMatrix assemble_kernel(const PointSet& targets, const PointSet& sources, PrincipalValue pv,
                             std::optional<double> coincide_tol) {
  const double tol = coincide_tol.value_or(default_coincide_tol(targets, sources));
  KernelMatrix k;
  k.policy = pv;
  k.entries = cauchy_matrix<double>(targets.nodes(), sources.nodes(), sources.weight(), pv, tol,
                                    &k.omitted);
  return k;
}

Complex cauchy_eval(Complex lambda, const PointSet& sources, const VectorXc& coeffs,
                    std::optional<double> coincide_tol) {
  if (coeffs.size() != sources.size()) {
    throw DomainError("coefficient count does not match source count");
  }
  const double tol = coincide_tol.value_or(
      kCoincideRelTol * std::max(1.0, point_cloud_extent(sources.nodes(), sources.nodes())));
  Complex sum{0.0, 0.0};
  for (Index k = 0; k < sources.size(); ++k) {
    const Complex d = lambda - sources[k];
    if (std::abs(d) < tol) {
      throw DomainError(fmt::format("evaluation point coincides with pole {}", k));
    }
    sum += coeffs[k] / d;
  }
  return 1.0 + sum * (sources.weight() / kPi);
}

DenseFactorization::DenseFactorization(MatrixXc a) : a_(std::move(a)) {
  if (a_.rows() != a_.cols()) throw DomainError("dense solve needs a square matrix");
  if (a_.rows() == 0) throw DomainError("dense solve needs a nonempty matrix");
  if (!a_.allFinite()) throw DomainError("matrix has non-finite entries");
  lu_.compute(a_);
  const double a_max = a_.cwiseAbs().maxCoeff();
  const auto upper = lu_.matrixLU().triangularView<Eigen::Upper>().toDenseMatrix();
  const double u_max = upper.cwiseAbs().maxCoeff();
  const double min_pivot = lu_.matrixLU().diagonal().cwiseAbs().minCoeff();
  const double rcond = lu_.rcond();
  condition_estimate_ = rcond > 0.0 ? std::max(1.0, 1.0 / rcond)
                                     : std::numeric_limits<double>::infinity();
  pivot_growth_ = a_max > 0.0 ? u_max / a_max : std::numeric_limits<double>::infinity();
  const double eps = std::numeric_limits<double>::epsilon();
  const double pivot_floor = static_cast<double>(a_.rows()) * eps * a_max;
  if (!(min_pivot > pivot_floor) || !(rcond > eps) || !std::isfinite(condition_estimate_)) {
    throw SingularSystemError(
        fmt::format("nonlocal system not uniquely solvable at these parameters "
                    "(min pivot {:.3e}, condition estimate {:.3e})",
                    min_pivot, condition_estimate_),
        condition_estimate_);
  }
}

MatrixXc DenseFactorization::solve(const MatrixXc& rhs) const {
  if (rhs.rows() != a_.rows()) throw DomainError("right-hand side has the wrong row count");
  return lu_.solve(rhs);
}

VectorXc DenseFactorization::solve(const VectorXc& rhs) const {
  if (rhs.size() != a_.rows()) throw DomainError("right-hand side has the wrong length");
  return lu_.solve(rhs);
}

SolveReport DenseFactorization::report(const MatrixXc& x, const MatrixXc& rhs) const {
  return {relative_residual(a_, x, rhs), condition_estimate_, pivot_growth_};
}

double relative_residual(const MatrixXc& a, const MatrixXc& x, const MatrixXc& b) {
  const double defect = (a * x - b).cwiseAbs().maxCoeff();
  const double scale = b.size() > 0 ? b.cwiseAbs().maxCoeff() : 0.0;
  return scale > 0.0 ? defect / scale : defect;
}

DenseSolution solve_dense(const MatrixXc& a, const MatrixXc& b) {
  if (b.cols() < 1) throw DomainError("dense solve needs at least one right-hand side");
  DenseFactorization lu(a);
  MatrixXc x = lu.solve(b);
  SolveReport report = lu.report(x, b);
  return {std::move(x), report};
}

}  // namespace fkp
