#include "fractal_kp/kp_engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "fractal_kp/singular_ieq.hpp"

namespace fkp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool finite(Complex z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

}  // namespace

Complex phase(Complex s, const PhasePoint& p) { return phase(s, p.x, Complex{p.y, 0.0}, p.t); }

Complex phase(Complex s, double x, Complex y, double t) {
  const Complex s2 = s * s;
  return s * x + s2 * y + s2 * s * t;
}

DressedAmplitudes dressed_amplitudes(const PointSet& nodes, const VectorXc& r1_base,
                                     const VectorXc& r2_base, const Isometry& phi,
                                     const PhasePoint& p) {
  if (r1_base.size() != nodes.size() || (r2_base.size() != 0 && r2_base.size() != nodes.size())) {
    throw DomainError("base amplitudes must be sampled at every node");
  }
  DressedAmplitudes out;
  out.r1.resize(nodes.size());
  out.r2.resize(r2_base.size());
  for (Index j = 0; j < nodes.size(); ++j) {
    const Complex exponent = phase(nodes[j], p) - phase(phi(nodes[j]), p);
    if (std::abs(exponent.real()) > kExponentLimit) out.overflow = true;
    out.r1[j] = std::exp(exponent) * r1_base[j];
    if (r2_base.size() != 0) out.r2[j] = std::exp(-exponent) * r2_base[j];
  }
  return out;
}

DressedSystem::DressedSystem(std::string kind, MatrixXc kernel, VectorXc poles,
                             VectorXc collocation, VectorXd weights, VectorXc base)
    : kind_(std::move(kind)),
      kernel_(std::move(kernel)),
      poles_(std::move(poles)),
      collocation_(std::move(collocation)),
      weights_(std::move(weights)),
      base_(std::move(base)) {
  if (!base_.allFinite()) throw DomainError("base amplitudes must be finite");
}

DressedSystem DressedSystem::one_component(const PointSet& q, const Isometry& phi,
                                           const VectorXc& r_base) {
  if (r_base.size() != q.size()) throw DomainError("r~ must be sampled at every node of Q");
  certify_disjoint(phi.apply(q), q, "phi(Q) and Q");
  return DressedSystem("one_component", one_component_kernel(q, phi), q.nodes(),
                       phi.apply(q).nodes(), VectorXd::Constant(q.size(), q.weight()), r_base);
}

DressedSystem DressedSystem::rational(const PointSet& q, const PointSet& r, const Isometry& phi,
                                      const VectorXc& r1_base, const VectorXc& r2_base) {
  if (r1_base.size() != q.size()) throw DomainError("r~1 must be sampled at every node of Q");
  if (r2_base.size() != r.size()) throw DomainError("r~2 must be sampled at phi^-1(R)");
  certify_two_component(q, r, phi);
  const Index nq = q.size();
  const Index nr = r.size();
  VectorXc poles(nq + nr);
  VectorXc collocation(nq + nr);
  VectorXd weights(nq + nr);
  VectorXc base(nq + nr);
  poles << q.nodes(), r.nodes();
  collocation << phi.apply(q).nodes(), phi.apply_inverse(r).nodes();
  weights << VectorXd::Constant(nq, q.weight()), VectorXd::Constant(nr, r.weight());
  base << r1_base, r2_base;
  return DressedSystem("rational", two_component_kernel(q, r, phi), std::move(poles),
                       std::move(collocation), std::move(weights), std::move(base));
}

DressedSystem DressedSystem::nystrom(const PointSet& q, const Isometry& phi,
                                     const VectorXc& r1_base, const VectorXc& r2_base) {
  if (r1_base.size() != q.size() || r2_base.size() != q.size()) {
    throw DomainError("r~1 and r~2 must be sampled at every node of Q");
  }
  certify_disjoint(phi.apply(q), q, "phi(Q) and Q");
  const Index n = q.size();
  const VectorXc image = phi.apply(q).nodes();
  VectorXc poles(2 * n);
  VectorXc collocation(2 * n);
  VectorXc base(2 * n);
  poles << q.nodes(), image;
  collocation << image, q.nodes();
  base << r1_base, r2_base;
  return DressedSystem("nystrom", ieq23_kernel(q, phi, nullptr), std::move(poles),
                       std::move(collocation), VectorXd::Constant(2 * n, q.weight()),
                       std::move(base));
}

DressedSystem DressedSystem::from_spec(const PointSet& q, const DressingSpec& spec) {
  if (spec.r2_base.size() == 0) return one_component(q, spec.phi, spec.r1_base);
  if (spec.partner) return rational(q, *spec.partner, spec.phi, spec.r1_base, spec.r2_base);
  return nystrom(q, spec.phi, spec.r1_base, spec.r2_base);
}

PointSolve DressedSystem::solve(double x, Complex y, double t, bool rebalance) const {
  const Index n = size();
  PointSolve out;
  // Row j of the system, divided by sigma_j:
  //   sigma_j f_j - b_j (K f)_j = b_j,  b_j = sigma_j r_j.
  // Rebalanced rows take sigma_j = 1/r_j, so no entry exceeds max(1, |K|).
  VectorXc sigma = VectorXc::Ones(n);
  VectorXc b = VectorXc::Zero(n);
  for (Index j = 0; j < n; ++j) {
    if (base_[j] == Complex{0.0, 0.0}) continue;
    const Complex exponent = phase(poles_[j], x, y, t) - phase(collocation_[j], x, y, t);
    if (!rebalance) {
      if (std::abs(exponent.real()) > kExponentLimit) {
        out.status = PointStatus::Overflow;
        out.message = fmt::format("dressing exponent {:.3e} overflows at row {}",
                                  exponent.real(), j);
        return out;
      }
      b[j] = std::exp(exponent) * base_[j];
    } else if (exponent.real() + std::log(std::abs(base_[j])) > 0.0) {
      sigma[j] = std::exp(-exponent) / base_[j];
      b[j] = 1.0;
    } else {
      b[j] = std::exp(exponent) * base_[j];
    }
  }
  try {
    MatrixXc system = -(b.asDiagonal() * kernel_);
    system.diagonal() += sigma;
    const DenseFactorization lu(std::move(system));
    MatrixXc rhs(n, 2);
    rhs.col(0) = b;
    const VectorXc f = lu.solve(VectorXc(b));
    const VectorXc kf = kernel_ * f;
    rhs.col(1) = ((poles_ - collocation_).array() * b.array() * (1.0 + kf.array())).matrix();
    MatrixXc x_all(n, 2);
    x_all.col(0) = f;
    x_all.col(1) = lu.solve(VectorXc(rhs.col(1)));
    const SolveReport report = lu.report(x_all, rhs);
    const VectorXd scaled = weights_ / kPi;
    out.chi1 = (scaled.cast<Complex>().array() * f.array()).sum();
    out.u = kReconstructionSign * 2.0 *
            (scaled.cast<Complex>().array() * x_all.col(1).array()).sum();
    out.condition = report.condition_estimate;
    out.residual = report.residual_norm;
    if (!finite(out.chi1) || !finite(out.u)) {
      out.status = PointStatus::SolveFailed;
      out.message = "non-finite field value";
    }
  } catch (const Error& e) {
    out.status = PointStatus::SolveFailed;
    out.message = e.what();
    if (const auto* singular = dynamic_cast<const SingularSystemError*>(&e)) {
      out.condition = singular->condition_estimate();
    }
  }
  return out;
}

void validate_axes(const GridAxes& axes) {
  for (const auto& [name, axis] : {std::pair{"x", axes.x}, {"y", axes.y}, {"t", axes.t}}) {
    if (axis.count < 1) throw DomainError(fmt::format("axis {} needs at least one point", name));
    if (axis.count > 1 && !(axis.step > 0.0)) {
      throw DomainError(fmt::format("axis {} spacing must be positive", name));
    }
    if (!std::isfinite(axis.min) || !std::isfinite(axis.step)) {
      throw DomainError(fmt::format("axis {} must be finite", name));
    }
  }
}

Index FieldGrid::failures() const {
  return static_cast<Index>(
      std::count_if(status.begin(), status.end(), [](PointStatus s) { return s != PointStatus::Ok; }));
}

FieldGrid compute_field(const DressedSystem& system, const GridAxes& axes,
                        const FieldOptions& options) {
  validate_axes(axes);
  FieldGrid grid;
  grid.axes = axes;
  const auto total = static_cast<std::size_t>(axes.x.count * axes.y.count * axes.t.count);
  grid.u.assign(total, Complex{kNaN, kNaN});
  grid.chi1.assign(total, Complex{kNaN, kNaN});
  grid.condition.assign(total, kNaN);
  grid.residual.assign(total, kNaN);
  grid.status.assign(total, PointStatus::SolveFailed);

  const Complex y_unit = axes.imaginary_y ? Complex{0.0, 1.0} : Complex{1.0, 0.0};
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < total; k = next++) {
      const auto idx = static_cast<Index>(k);
      const Index ix = idx % axes.x.count;
      const Index iy = (idx / axes.x.count) % axes.y.count;
      const Index it = idx / (axes.x.count * axes.y.count);
      const PointSolve s =
          system.solve(axes.x.at(ix), y_unit * axes.y.at(iy), axes.t.at(it), options.rebalance);
      grid.u[k] = s.u;
      grid.chi1[k] = s.chi1;
      grid.condition[k] = s.condition;
      grid.residual[k] = s.residual;
      grid.status[k] = s.status;
    }
  };
  const int jobs = std::max(1, options.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(jobs));
    for (int i = 0; i < jobs; ++i) pool.emplace_back(worker);
  }
  return grid;
}

FieldGrid compute_field(const PointSet& q, const DressingSpec& spec, const GridAxes& axes,
                        int jobs) {
  return compute_field(DressedSystem::from_spec(q, spec), axes, {jobs, spec.rebalance});
}

namespace {

struct Stencil {
  const FieldGrid& f;
  double hx, hy, ht;

  Complex u(Index i, Index j, Index k) const { return f.u_at(i, j, k); }

  Complex g(Index i, Index j, Index k) const {
    const Complex ut = (u(i, j, k + 1) - u(i, j, k - 1)) / (2.0 * ht);
    const Complex ux = (u(i + 1, j, k) - u(i - 1, j, k)) / (2.0 * hx);
    const Complex uxxx = (u(i + 2, j, k) - 2.0 * u(i + 1, j, k) + 2.0 * u(i - 1, j, k) -
                          u(i - 2, j, k)) /
                         (2.0 * hx * hx * hx);
    return 4.0 * ut + 6.0 * u(i, j, k) * ux - uxxx;
  }

  bool g_ok(Index i, Index j, Index k) const {
    for (Index d = -2; d <= 2; ++d) {
      if (!f.ok(i + d, j, k)) return false;
    }
    return f.ok(i, j, k - 1) && f.ok(i, j, k + 1);
  }
};

void require_residual_grid(const FieldGrid& field) {
  if (field.nx() < 7 || field.ny() < 3 || field.nt() < 3) {
    throw DomainError(fmt::format(
        "KP residual needs at least 7 x, 3 y and 3 t points, got {}x{}x{}", field.nx(),
        field.ny(), field.nt()));
  }
}

}  // namespace

Complex kp_residual_at(const FieldGrid& field, Index ix, Index iy, Index it) {
  require_residual_grid(field);
  if (ix < 3 || ix > field.nx() - 4 || iy < 1 || iy > field.ny() - 2 || it < 1 ||
      it > field.nt() - 2) {
    throw DomainError("residual point is not interior");
  }
  const Stencil s{field, field.axes.x.step, field.axes.y.step, field.axes.t.step};
  if (!s.g_ok(ix - 1, iy, it) || !s.g_ok(ix + 1, iy, it) || !field.ok(ix, iy - 1, it) ||
      !field.ok(ix, iy + 1, it) || !field.ok(ix, iy, it)) {
    return {kNaN, kNaN};
  }
  const double y_sign = field.axes.imaginary_y ? -1.0 : 1.0;
  const Complex gx = (s.g(ix + 1, iy, it) - s.g(ix - 1, iy, it)) / (2.0 * s.hx);
  const Complex uyy =
      (s.u(ix, iy + 1, it) - 2.0 * s.u(ix, iy, it) + s.u(ix, iy - 1, it)) / (s.hy * s.hy);
  return gx - 3.0 * y_sign * uyy;
}

ResidualReport kp_residual(const FieldGrid& field, const std::optional<Region>& region) {
  require_residual_grid(field);
  ResidualReport report;
  report.nx = field.nx() - 6;
  report.ny = field.ny() - 2;
  report.nt = field.nt() - 2;
  report.values.assign(static_cast<std::size_t>(report.nx * report.ny * report.nt),
                       Complex{kNaN, kNaN});
  const auto& ax = field.axes;
  auto inside = [&](double v, double lo, double hi, double h) {
    const double slack = 1e-9 * std::max(h, 1.0);
    return v >= lo - slack && v <= hi + slack;
  };
  double sum_sq = 0.0;
  for (Index it = 1; it < field.nt() - 1; ++it) {
    for (Index iy = 1; iy < field.ny() - 1; ++iy) {
      for (Index ix = 3; ix < field.nx() - 3; ++ix) {
        if (region &&
            !(inside(ax.x.at(ix), region->x_lo, region->x_hi, ax.x.step) &&
              inside(ax.y.at(iy), region->y_lo, region->y_hi, ax.y.step) &&
              inside(ax.t.at(it), region->t_lo, region->t_hi, ax.t.step))) {
          continue;
        }
        const Complex r = kp_residual_at(field, ix, iy, it);
        report.values[static_cast<std::size_t>((ix - 3) + report.nx * ((iy - 1) + report.ny * (it - 1)))] = r;
        if (!finite(r)) {
          ++report.skipped;
          continue;
        }
        ++report.evaluated;
        report.max_norm = std::max(report.max_norm, std::abs(r));
        sum_sq += std::norm(r);
      }
    }
  }
  if (report.evaluated > 0) report.rms_norm = std::sqrt(sum_sq / static_cast<double>(report.evaluated));
  return report;
}

KdvReport kdv_probe(const FieldGrid& field) {
  KdvReport report;
  for (std::size_t k = 0; k < field.u.size(); ++k) {
    if (field.status[k] == PointStatus::Ok) {
      report.max_im_u = std::max(report.max_im_u, std::abs(field.u[k].imag()));
    }
  }
  if (field.ny() >= 3) {
    double max_uy = 0.0;
    for (Index it = 0; it < field.nt(); ++it) {
      for (Index iy = 1; iy < field.ny() - 1; ++iy) {
        for (Index ix = 0; ix < field.nx(); ++ix) {
          if (!field.ok(ix, iy - 1, it) || !field.ok(ix, iy + 1, it)) continue;
          const Complex uy =
              (field.u_at(ix, iy + 1, it) - field.u_at(ix, iy - 1, it)) / (2.0 * field.axes.y.step);
          max_uy = std::max(max_uy, std::abs(uy));
        }
      }
    }
    report.max_u_y = max_uy;
  }
  if (field.nx() >= 5 && field.nt() >= 3) {
    const Stencil s{field, field.axes.x.step, field.axes.y.step, field.axes.t.step};
    double variation = 0.0;
    double g_max = 0.0;
    for (Index it = 1; it < field.nt() - 1; ++it) {
      for (Index iy = 0; iy < field.ny(); ++iy) {
        std::vector<Complex> g;
        for (Index ix = 2; ix < field.nx() - 2; ++ix) {
          if (s.g_ok(ix, iy, it)) g.push_back(s.g(ix, iy, it));
        }
        for (std::size_t a = 0; a < g.size(); ++a) {
          g_max = std::max(g_max, std::abs(g[a]));
          for (std::size_t c = a + 1; c < g.size(); ++c) {
            variation = std::max(variation, std::abs(g[a] - g[c]));
          }
        }
      }
    }
    report.g_x_variation = variation;
    report.g_max_abs = g_max;
  }
  return report;
}

RealityReport reality_probe_kp(const FieldGrid& real_y, const FieldGrid& imaginary_y, double tol) {
  auto max_imag = [](const FieldGrid& g) {
    double m = 0.0;
    for (std::size_t k = 0; k < g.u.size(); ++k) {
      if (g.status[k] == PointStatus::Ok) m = std::max(m, std::abs(g.u[k].imag()));
    }
    return m;
  };
  RealityReport report;
  report.max_im_real_y = max_imag(real_y);
  report.max_im_imaginary_y = max_imag(imaginary_y);
  report.kp2_real = report.max_im_real_y <= tol;
  report.kp1_real = report.max_im_imaginary_y <= tol;
  if (report.kp2_real && report.kp1_real) {
    report.label = "both";
  } else if (report.kp2_real) {
    report.label = "kp2-real";
  } else if (report.kp1_real) {
    report.label = "kp1-real";
  } else {
    report.label = "neither";
  }
  return report;
}

SpectrumReport schrodinger_spectrum_probe(const VectorXc& u_interior, double h, Index n_eigs,
                                          const IntervalList& spectral_support, double imag_tol) {
  const Index n = u_interior.size();
  if (n < 2) throw DomainError("spectrum probe needs at least two interior samples");
  if (!(h > 0.0)) throw DomainError("spectrum probe needs a positive spacing");
  if (!u_interior.allFinite()) throw DomainError("potential slice is not finite");
  if (u_interior.imag().cwiseAbs().maxCoeff() > imag_tol) {
    throw DomainError("potential slice is not real");
  }
  const double inv_h2 = 1.0 / (h * h);
  const VectorXd diagonal = (u_interior.real().array() + 2.0 * inv_h2).matrix();
  const VectorXd sub = VectorXd::Constant(n - 1, -inv_h2);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diagonal, sub, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw Error("tridiagonal eigensolver did not converge");

  SpectrumReport report;
  const Index count = std::min(n_eigs, n);
  for (Index i = 0; i < count; ++i) report.eigenvalues.push_back(solver.eigenvalues()[i]);

  for (const double e : report.eigenvalues) {
    if (e >= 0.0) continue;
    BandComparison row;
    row.eigenvalue = e;
    row.distance = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < spectral_support.size(); ++b) {
      const auto [l, r] = spectral_support[b];
      const double lo = -std::max(l * l, r * r);
      const double hi = (l <= 0.0 && r >= 0.0) ? 0.0 : -std::min(l * l, r * r);
      const double d = e < lo ? lo - e : (e > hi ? e - hi : 0.0);
      if (d < row.distance) {
        row.distance = d;
        row.nearest_band = static_cast<Index>(b);
        row.band_lo = lo;
        row.band_hi = hi;
      }
    }
    if (spectral_support.empty()) row.distance = kNaN;
    report.table.push_back(row);
  }
  return report;
}

}  // namespace fkp
