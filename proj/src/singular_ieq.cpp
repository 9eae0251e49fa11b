#include "fractal_kp/singular_ieq.hpp"

#include <algorithm>
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

// Cauchy sum (1/(pi N)) sum_k c_k / (z - p_k), skipping poles within tol of z.
Complex pv_sum(Complex z, const VectorXc& poles, const VectorXc& coeffs, double weight,
               double tol) {
  Complex sum{0.0, 0.0};
  for (Index k = 0; k < poles.size(); ++k) {
    const Complex d = z - poles[k];
    if (std::abs(d) >= tol) sum += coeffs[k] / d;
  }
  return sum * (weight / kPi);
}

}  // namespace

MatrixXc ieq1_kernel(const PointSet& q, const Isometry& phi) {
  return assemble_kernel(phi.apply(q), q, PrincipalValue::None).entries / kPi;
}

MatrixXc ieq23_kernel(const PointSet& q, const Isometry& phi, std::vector<IndexPair>* omitted) {
  const Index n = q.size();
  const PointSet image = phi.apply(q);
  const double tol = default_coincide_tol(image, q);
  const KernelMatrix image_to_q = assemble_kernel(image, q, PrincipalValue::None, tol);
  const KernelMatrix image_to_image = assemble_kernel(image, image, PrincipalValue::OmitCoincident, tol);
  const KernelMatrix q_to_q = assemble_kernel(q, q, PrincipalValue::OmitCoincident, tol);
  const KernelMatrix q_to_image = assemble_kernel(q, image, PrincipalValue::None, tol);

  MatrixXc k(2 * n, 2 * n);
  k << image_to_q.entries, image_to_image.entries, q_to_q.entries, q_to_image.entries;
  k /= kPi;
  if (omitted != nullptr) {
    for (const auto& [row, col] : image_to_image.omitted) omitted->emplace_back(row, n + col);
    for (const auto& [row, col] : q_to_q.omitted) omitted->emplace_back(n + row, col);
  }
  return k;
}

IEQSolution solve_ieq1(const PointSet& q, const VectorXc& r_at_nodes, const Isometry& phi) {
  check_amplitudes(r_at_nodes, q, "r");
  certify_disjoint(phi.apply(q), q, "phi(Q) and Q");
  const MatrixXc k = ieq1_kernel(q, phi);
  const MatrixXc system = MatrixXc::Identity(q.size(), q.size()) - r_at_nodes.asDiagonal() * k;
  auto [x, report] = solve_dense(system, r_at_nodes);
  VectorXc f = x.col(0);
  const Complex chi1 = f.sum() * (q.weight() / kPi);
  return {q, phi, r_at_nodes, VectorXc{}, std::move(f), VectorXc{}, report, chi1, {}, {}};
}

IEQSolution solve_ieq23(const PointSet& q, const VectorXc& r1_at_nodes,
                        const VectorXc& r2_at_nodes, const Isometry& phi) {
  check_amplitudes(r1_at_nodes, q, "r1");
  check_amplitudes(r2_at_nodes, q, "r2");
  certify_disjoint(phi.apply(q), q, "phi(Q) and Q");
  const Index n = q.size();
  std::vector<IndexPair> omitted;
  const MatrixXc k = ieq23_kernel(q, phi, &omitted);
  VectorXc amplitudes(2 * n);
  amplitudes << r1_at_nodes, r2_at_nodes;
  const double dynamic_range =
      amplitudes.cwiseAbs().maxCoeff() /
      std::max(amplitudes.cwiseAbs().minCoeff(), std::numeric_limits<double>::min());
  std::vector<std::string> warnings;
  if (dynamic_range > 1e12 && amplitudes.cwiseAbs().minCoeff() > 0.0) {
    warnings.push_back(fmt::format(
        "dressed amplitudes span a dynamic range of {:.3e}; consider rebalancing", dynamic_range));
  }
  const MatrixXc system = MatrixXc::Identity(2 * n, 2 * n) - amplitudes.asDiagonal() * k;
  auto [x, report] = solve_dense(system, amplitudes);
  VectorXc f1 = x.col(0).head(n);
  VectorXc f2 = x.col(0).tail(n);
  const Complex chi1 = (f1.sum() + f2.sum()) * (q.weight() / kPi);
  return {q, phi, r1_at_nodes, r2_at_nodes, std::move(f1), std::move(f2), report, chi1,
          std::move(omitted), std::move(warnings)};
}

Complex chi_tilde_eval(const IEQSolution& sol, Complex lambda) {
  Complex value = cauchy_eval(lambda, sol.nodes, sol.f1);
  if (sol.two_component()) value += cauchy_eval(lambda, sol.phi.apply(sol.nodes), sol.f2) - 1.0;
  return value;
}

double ieq_residual(const IEQSolution& sol) {
  const PointSet image = sol.phi.apply(sol.nodes);
  const double tol = default_coincide_tol(image, sol.nodes);
  const double w = sol.nodes.weight();
  double defect = 0.0;
  for (Index j = 0; j < sol.nodes.size(); ++j) {
    const Complex at_image = image[j];
    Complex chi = 1.0 + pv_sum(at_image, sol.nodes.nodes(), sol.f1, w, tol);
    if (sol.two_component()) chi += pv_sum(at_image, image.nodes(), sol.f2, w, tol);
    defect = std::max(defect, std::abs(sol.f1[j] - sol.r1[j] * chi));
  }
  if (sol.two_component()) {
    for (Index j = 0; j < sol.nodes.size(); ++j) {
      const Complex at_node = sol.nodes[j];
      const Complex chi = 1.0 + pv_sum(at_node, sol.nodes.nodes(), sol.f1, w, tol) +
                          pv_sum(at_node, image.nodes(), sol.f2, w, tol);
      defect = std::max(defect, std::abs(sol.f2[j] - sol.r2[j] * chi));
    }
  }
  double scale = sol.f1.size() > 0 ? sol.f1.cwiseAbs().maxCoeff() : 0.0;
  if (sol.two_component()) scale = std::max(scale, sol.f2.cwiseAbs().maxCoeff());
  return scale > 0.0 ? defect / scale : defect;
}

void write_ieq_csv(std::ostream& out, const IEQSolution& sol) {
  out << "block,index,node_re,node_im,f_re,f_im\n";
  auto block = [&](const char* name, const VectorXc& f) {
    for (Index j = 0; j < sol.nodes.size(); ++j) {
      out << fmt::format("{},{},{:.17g},{:.17g},{:.17g},{:.17g}\n", name, j,
                         sol.nodes[j].real(), sol.nodes[j].imag(), f[j].real(), f[j].imag());
    }
  };
  block("f1", sol.f1);
  if (sol.two_component()) block("f2", sol.f2);
}

void write_chi_batch_csv(std::ostream& out, const IEQSolution& sol,
                         std::span<const Complex> points) {
  out << "re,im,chi_re,chi_im\n";
  for (const Complex z : points) {
    const Complex chi = chi_tilde_eval(sol, z);
    out << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g}\n", z.real(), z.imag(), chi.real(),
                       chi.imag());
  }
}

}  // namespace fkp
