#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fractal_kp/cauchy_core.hpp"
#include "fractal_kp/finite_dbar.hpp"

namespace fkp {

// Nystrom discretisation of the limiting singular integral equations on the
// uniform node measure. Collocation and quadrature share the nodes, so
//
//   f(t)  = r(t)  chi(phi(t))                       (single family)
//   f1(t) = r1(t) chi~(phi(t)),  f2(t) = r2(t) chi~(t)   (pair)
//
// where the same-set Cauchy sums (kernels 1/(phi(t)-phi(s)) and 1/(t-s)) are
// principal values realised by omitting the coincident node.

struct IEQSolution {
  PointSet nodes;
  Isometry phi;
  VectorXc r1;
  VectorXc r2;  // empty for the single-family equation
  VectorXc f1;
  VectorXc f2;  // empty for the single-family equation
  SolveReport report;
  Complex chi1;  // (1/pi) sum w (f1 + f2), the 1/lambda coefficient of chi~
  std::vector<IndexPair> omitted;
  std::vector<std::string> warnings;

  bool two_component() const { return f2.size() > 0; }
};

/// Kernel of the single-family equation, assembled through assemble_kernel.
MatrixXc ieq1_kernel(const PointSet& q, const Isometry& phi);

/// 2N x 2N kernel, rows [phi(Q); Q], columns [poles Q; poles phi(Q)], scaled by
/// 1/pi, with the coincident same-set entries omitted (reported in `omitted`).
MatrixXc ieq23_kernel(const PointSet& q, const Isometry& phi, std::vector<IndexPair>* omitted);

IEQSolution solve_ieq1(const PointSet& q, const VectorXc& r_at_nodes, const Isometry& phi);

IEQSolution solve_ieq23(const PointSet& q, const VectorXc& r1_at_nodes,
                        const VectorXc& r2_at_nodes, const Isometry& phi);

/// 1 + (1/(pi N)) sum_k [f1_k/(lambda - s_k) + f2_k/(lambda - phi(s_k))].
Complex chi_tilde_eval(const IEQSolution& sol, Complex lambda);

/// Discrete integral-equation defect max|f - r chi_pv(collocation)| relative
/// to max|f|, recomputed by direct summation.
double ieq_residual(const IEQSolution& sol);

/// CSV "block,index,node_re,node_im,f_re,f_im".
void write_ieq_csv(std::ostream& out, const IEQSolution& sol);

/// CSV "re,im,chi_re,chi_im" for a batch of evaluation points.
void write_chi_batch_csv(std::ostream& out, const IEQSolution& sol,
                         std::span<const Complex> points);

}  // namespace fkp
