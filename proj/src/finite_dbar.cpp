#include "fractal_kp/finite_dbar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <fmt/format.h>

namespace fkp {

namespace {

void check_amplitudes(const VectorXc& r, const PointSet& nodes, const char* name) {
  if (r.size() != nodes.size()) {
    throw DomainError(fmt::format("{} has {} samples for {} nodes", name, r.size(), nodes.size()));
  }
  if (!r.allFinite()) throw DomainError(fmt::format("{} is not finite at every node", name));
}

double relative_to(double defect, const VectorXc& coeffs) {
  const double scale = coeffs.size() > 0 ? coeffs.cwiseAbs().maxCoeff() : 0.0;
  return scale > 0.0 ? defect / scale : defect;
}

}  // namespace

Isometry Isometry::make(Complex alpha, Complex beta) {
  if (!(std::abs(std::abs(alpha) - 1.0) <= 1e-14)) {
    throw DomainError(fmt::format("isometry needs |alpha| = 1, got |alpha| = {:.17g}",
                                  std::abs(alpha)));
  }
  if (!std::isfinite(beta.real()) || !std::isfinite(beta.imag())) {
    throw DomainError("isometry shift must be finite");
  }
  return {alpha, beta};
}

PointSet Isometry::apply(const PointSet& points) const {
  VectorXc mapped = (alpha * points.nodes().array() + beta).matrix();
  return PointSet(std::move(mapped), points.provenance());
}

PointSet Isometry::apply_inverse(const PointSet& points) const {
  VectorXc mapped = ((points.nodes().array() - beta) / alpha).matrix();
  return PointSet(std::move(mapped), points.provenance());
}

void certify_disjoint(const PointSet& a, const PointSet& b, const std::string& what) {
  const double tol = kCoincideRelTol * std::max(1.0, point_cloud_extent(a.nodes(), b.nodes()));
  double best = std::numeric_limits<double>::infinity();
  Index bi = 0;
  Index bj = 0;
  for (Index i = 0; i < a.size(); ++i) {
    for (Index j = 0; j < b.size(); ++j) {
      const double d = std::abs(a[i] - b[j]);
      if (d < best) {
        best = d;
        bi = i;
        bj = j;
      }
    }
  }
  if (best <= tol) {
    throw CoincidenceError(
        fmt::format("{} are not disjoint: point {} meets point {} (separation {:.3e})", what, bi,
                    bj, best),
        bi, bj);
  }
}

MatrixXc one_component_kernel(const PointSet& q, const Isometry& phi) {
  const Index n = q.size();
  const double scale = 1.0 / (kPi * static_cast<double>(n));
  MatrixXc k(n, n);
  for (Index j = 0; j < n; ++j) {
    const Complex partner = phi(q[j]);
    for (Index m = 0; m < n; ++m) k(j, m) = scale / (partner - q[m]);
  }
  return k;
}

void certify_two_component(const PointSet& q, const PointSet& r, const Isometry& phi) {
  const PointSet phi_q = phi.apply(q);
  const PointSet pre_r = phi.apply_inverse(r);
  certify_disjoint(phi_q, q, "phi(Q) and Q");
  certify_disjoint(phi_q, r, "phi(Q) and R");
  certify_disjoint(q, r, "Q and R");
  certify_disjoint(pre_r, r, "phi^-1(R) and R");
}

MatrixXc two_component_kernel(const PointSet& q, const PointSet& r, const Isometry& phi) {
  const Index nq = q.size();
  const Index nr = r.size();
  VectorXc targets(nq + nr);
  VectorXc sources(nq + nr);
  VectorXd weights(nq + nr);
  for (Index j = 0; j < nq; ++j) {
    targets[j] = phi(q[j]);
    sources[j] = q[j];
    weights[j] = q.weight();
  }
  for (Index k = 0; k < nr; ++k) {
    targets[nq + k] = phi.inverse(r[k]);
    sources[nq + k] = r[k];
    weights[nq + k] = r.weight();
  }
  MatrixXc kernel(nq + nr, nq + nr);
  for (Index col = 0; col < kernel.cols(); ++col) {
    for (Index row = 0; row < kernel.rows(); ++row) {
      kernel(row, col) = weights[col] / (kPi * (targets[row] - sources[col]));
    }
  }
  return kernel;
}

OneComponentSolution solve_one_component(const PointSet& q, const VectorXc& r_at_nodes,
                                         const Isometry& phi) {
  check_amplitudes(r_at_nodes, q, "r");
  certify_disjoint(phi.apply(q), q, "phi(Q) and Q");
  const MatrixXc k = one_component_kernel(q, phi);
  // a_j - r_j sum_k K_jk a_k = r_j
  MatrixXc system = MatrixXc::Identity(q.size(), q.size());
  for (Index j = 0; j < q.size(); ++j) system.row(j) -= r_at_nodes[j] * k.row(j);
  auto [x, report] = solve_dense(system, r_at_nodes);
  return {q, phi, r_at_nodes, x.col(0), report};
}

TwoComponentSolution solve_two_component(const PointSet& q, const PointSet& r,
                                         const VectorXc& r1_at_nodes,
                                         const VectorXc& r2_at_nodes, const Isometry& phi) {
  check_amplitudes(r1_at_nodes, q, "r1");
  check_amplitudes(r2_at_nodes, r, "r2");
  certify_two_component(q, r, phi);
  std::vector<std::string> warnings;
  const double separation = min_pairwise_separation(phi.apply(q), r);
  const double diameter = point_cloud_extent(q.nodes(), r.nodes());
  if (separation < 1e-3 * diameter) {
    warnings.push_back(fmt::format(
        "phi(Q) and R are only {:.3e} apart (diameter {:.3e}); expect poor conditioning",
        separation, diameter));
  }
  const Index nq = q.size();
  const Index nr = r.size();
  VectorXc amplitudes(nq + nr);
  amplitudes << r1_at_nodes, r2_at_nodes;
  const MatrixXc system = MatrixXc::Identity(nq + nr, nq + nr) -
                          amplitudes.asDiagonal() * two_component_kernel(q, r, phi);
  auto [x, report] = solve_dense(system, amplitudes);
  return {q,   r,   phi, r1_at_nodes, r2_at_nodes, x.col(0).head(nq), x.col(0).tail(nr),
          report, std::move(warnings)};
}

Complex eval_chi(const OneComponentSolution& sol, Complex lambda) {
  return cauchy_eval(lambda, sol.nodes, sol.a);
}

Complex eval_chi(const TwoComponentSolution& sol, Complex lambda) {
  return cauchy_eval(lambda, sol.nodes_q, sol.a) + cauchy_eval(lambda, sol.nodes_r, sol.b) - 1.0;
}

Complex chi_first_moment(const OneComponentSolution& sol) {
  return sol.a.sum() * (sol.nodes.weight() / kPi);
}

Complex chi_first_moment(const TwoComponentSolution& sol) {
  return sol.a.sum() * (sol.nodes_q.weight() / kPi) + sol.b.sum() * (sol.nodes_r.weight() / kPi);
}

double nonlocal_residual(const OneComponentSolution& sol) {
  double defect = 0.0;
  for (Index j = 0; j < sol.nodes.size(); ++j) {
    const Complex expected = sol.amplitudes[j] * eval_chi(sol, sol.phi(sol.nodes[j]));
    defect = std::max(defect, std::abs(sol.a[j] - expected));
  }
  return relative_to(defect, sol.a);
}

double nonlocal_residual(const TwoComponentSolution& sol) {
  double defect = 0.0;
  for (Index j = 0; j < sol.nodes_q.size(); ++j) {
    const Complex expected = sol.r1[j] * eval_chi(sol, sol.phi(sol.nodes_q[j]));
    defect = std::max(defect, std::abs(sol.a[j] - expected));
  }
  for (Index k = 0; k < sol.nodes_r.size(); ++k) {
    const Complex expected = sol.r2[k] * eval_chi(sol, sol.phi.inverse(sol.nodes_r[k]));
    defect = std::max(defect, std::abs(sol.b[k] - expected));
  }
  VectorXc all(sol.a.size() + sol.b.size());
  all << sol.a, sol.b;
  return relative_to(defect, all);
}

namespace {

void write_block(std::ostream& out, const char* block, const PointSet& nodes,
                 const VectorXc& coeffs) {
  for (Index j = 0; j < nodes.size(); ++j) {
    out << fmt::format("{},{},{:.17g},{:.17g},{:.17g},{:.17g}\n", block, j, nodes[j].real(),
                       nodes[j].imag(), coeffs[j].real(), coeffs[j].imag());
  }
}

}  // namespace

void write_solution_csv(std::ostream& out, const OneComponentSolution& sol) {
  out << "block,index,node_re,node_im,coef_re,coef_im\n";
  write_block(out, "a", sol.nodes, sol.a);
}

void write_solution_csv(std::ostream& out, const TwoComponentSolution& sol) {
  out << "block,index,node_re,node_im,coef_re,coef_im\n";
  write_block(out, "a", sol.nodes_q, sol.a);
  write_block(out, "b", sol.nodes_r, sol.b);
}

}  // namespace fkp
