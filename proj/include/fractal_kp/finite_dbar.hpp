#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fractal_kp/cauchy_core.hpp"
#include "fractal_kp/fractal_geometry.hpp"

namespace fkp {

/// Rigid motion phi(z) = alpha z + beta with |alpha| = 1.
struct Isometry {
  Complex alpha{-1.0, 0.0};
  Complex beta{0.0, 0.0};

  /// Validates ||alpha| - 1| <= 1e-14.
  static Isometry make(Complex alpha, Complex beta);
  static Isometry reflection() { return {}; }  // phi(z) = -z

  Complex operator()(Complex z) const { return alpha * z + beta; }
  Complex inverse(Complex z) const { return (z - beta) / alpha; }

  PointSet apply(const PointSet& points) const;
  PointSet apply_inverse(const PointSet& points) const;
};

/// Throws CoincidenceError naming the closest pair when the families touch.
void certify_disjoint(const PointSet& a, const PointSet& b, const std::string& what);

/// chi_n for a single pole family Q with the nonlocal condition
/// a_j = r(lambda_j) chi_n(phi(lambda_j)).
struct OneComponentSolution {
  PointSet nodes;
  Isometry phi;
  VectorXc amplitudes;  // r at the nodes
  VectorXc a;
  SolveReport report;
};

/// chi~_n with poles on Q (coefficients a) and on R (coefficients b), where
/// a_j = r1_j chi~(phi(lambda_j)) and b_k = r2_k chi~(phi^-1(mu_k)).
struct TwoComponentSolution {
  PointSet nodes_q;
  PointSet nodes_r;
  Isometry phi;
  VectorXc r1;  // at Q
  VectorXc r2;  // at phi^-1(R)
  VectorXc a;
  VectorXc b;
  SolveReport report;
  std::vector<std::string> warnings;
};

/// K[j,k] = 1 / (pi N (phi(lambda_j) - lambda_k)), the x-independent part of
/// the one-component system.
MatrixXc one_component_kernel(const PointSet& q, const Isometry& phi);

/// Block kernel for [a; b]: targets [phi(Q); phi^-1(R)], sources [Q; R], each
/// column weighted by its family's 1/|family| and 1/pi.
MatrixXc two_component_kernel(const PointSet& q, const PointSet& r, const Isometry& phi);

/// Checks every disjointness the two-component system needs.
void certify_two_component(const PointSet& q, const PointSet& r, const Isometry& phi);

OneComponentSolution solve_one_component(const PointSet& q, const VectorXc& r_at_nodes,
                                         const Isometry& phi);

TwoComponentSolution solve_two_component(const PointSet& q, const PointSet& r,
                                         const VectorXc& r1_at_nodes,
                                         const VectorXc& r2_at_nodes, const Isometry& phi);

Complex eval_chi(const OneComponentSolution& sol, Complex lambda);
Complex eval_chi(const TwoComponentSolution& sol, Complex lambda);

/// Coefficient of 1/lambda in the expansion of chi at infinity.
Complex chi_first_moment(const OneComponentSolution& sol);
Complex chi_first_moment(const TwoComponentSolution& sol);

/// max over the nonlocal conditions of |coefficient - r chi(partner)|,
/// relative to the largest coefficient; chi is re-evaluated pointwise.
double nonlocal_residual(const OneComponentSolution& sol);
double nonlocal_residual(const TwoComponentSolution& sol);

/// CSV "block,index,node_re,node_im,coef_re,coef_im".
void write_solution_csv(std::ostream& out, const OneComponentSolution& sol);
void write_solution_csv(std::ostream& out, const TwoComponentSolution& sol);

}  // namespace fkp
