#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fractal_kp/cauchy_core.hpp"
#include "fractal_kp/finite_dbar.hpp"
#include "fractal_kp/fractal_geometry.hpp"

namespace fkp {

/// u = kReconstructionSign * 2 * d/dx chi^(1), where chi^(1) is the coefficient
/// of 1/lambda in chi at infinity. Fixed by the N = 1 calibration: only this
/// sign makes the one-soliton KP residual vanish.
inline constexpr double kReconstructionSign = -1.0;

/// Dressed rows whose |Re exponent| exceeds this are flagged when rebalancing
/// is off (exp overflows near 709).
inline constexpr double kExponentLimit = 700.0;

struct PhasePoint {
  double x = 0.0;
  double y = 0.0;
  double t = 0.0;
};

/// psi(s) = s x + s^2 y + s^3 t.
Complex phase(Complex s, const PhasePoint& p);
/// Same with complex y, used for the u(x, iy, t) continuation.
Complex phase(Complex s, double x, Complex y, double t);

/// Undressed amplitudes r~1 (at Q) and r~2, plus the isometry.
///
/// The layout of r~2 selects the system: empty for the single-family problem,
/// sampled at Q for the same-node Nystrom pair, or sampled at phi^-1(R) when a
/// staggered partner family R is given (rational chi~_n, the default).
struct DressingSpec {
  Isometry phi;
  VectorXc r1_base;
  VectorXc r2_base;
  std::optional<PointSet> partner;
  bool rebalance = true;
};

struct DressedAmplitudes {
  VectorXc r1;
  VectorXc r2;
  bool overflow = false;
};

/// r1_j = e^{psi(s_j) - psi(phi(s_j))} r~1_j and r2_j = e^{psi(phi(s_j)) - psi(s_j)} r~2_j
/// for s_j in `nodes`. `overflow` is set when an exponent's real part passes
/// kExponentLimit; the affected entries are left non-finite.
DressedAmplitudes dressed_amplitudes(const PointSet& nodes, const VectorXc& r1_base,
                                     const VectorXc& r2_base, const Isometry& phi,
                                     const PhasePoint& p);

enum class PointStatus : int { Ok = 0, SolveFailed = 1, Overflow = 2 };

struct PointSolve {
  Complex chi1{0.0, 0.0};
  Complex u{0.0, 0.0};
  double condition = 1.0;
  double residual = 0.0;
  PointStatus status = PointStatus::Ok;
  std::string message;
};

/// The (x, y, t)-independent part of a dressed nonlocal system
///
///   f_j = r_j chi(q_j),  chi(z) = 1 + sum_k w_k f_k / (pi (z - p_k)),
///   r_j = e^{psi(p_j) - psi(q_j)} r~_j,
///
/// with poles p, collocation points q and the Cauchy kernel assembled once.
/// Differentiating in x leaves the matrix unchanged and multiplies the data by
/// p_j - q_j, so d/dx chi^(1) comes from a second solve on the same factors.
class DressedSystem {
 public:
  static DressedSystem one_component(const PointSet& q, const Isometry& phi,
                                     const VectorXc& r_base);
  static DressedSystem rational(const PointSet& q, const PointSet& r, const Isometry& phi,
                                const VectorXc& r1_base, const VectorXc& r2_base);
  static DressedSystem nystrom(const PointSet& q, const Isometry& phi, const VectorXc& r1_base,
                               const VectorXc& r2_base);
  static DressedSystem from_spec(const PointSet& q, const DressingSpec& spec);

  /// Solve at one space-time point. Never throws for numerical failure; the
  /// status field carries it.
  PointSolve solve(double x, Complex y, double t, bool rebalance = true) const;

  Index size() const { return poles_.size(); }
  const VectorXc& poles() const { return poles_; }
  const VectorXc& collocation() const { return collocation_; }
  const VectorXd& weights() const { return weights_; }
  const VectorXc& base_amplitudes() const { return base_; }
  const MatrixXc& kernel() const { return kernel_; }
  const std::string& kind() const { return kind_; }

 private:
  DressedSystem(std::string kind, MatrixXc kernel, VectorXc poles, VectorXc collocation,
                VectorXd weights, VectorXc base);

  std::string kind_;
  MatrixXc kernel_;  // w_k / (pi (q_j - p_k)); principal-value entries are zero
  VectorXc poles_;
  VectorXc collocation_;
  VectorXd weights_;
  VectorXc base_;
};

struct Axis {
  double min = 0.0;
  double step = 1.0;
  Index count = 1;

  double at(Index i) const { return min + step * static_cast<double>(i); }
  double max() const { return at(count - 1); }
};

struct GridAxes {
  Axis x;
  Axis y;
  Axis t;
  bool imaginary_y = false;  // evaluate at y -> i y (KP-I continuation)
};

void validate_axes(const GridAxes& axes);

/// Field values over an (x, y, t) lattice, stored x-fastest.
struct FieldGrid {
  GridAxes axes;
  std::vector<Complex> u;
  std::vector<Complex> chi1;
  std::vector<double> condition;
  std::vector<double> residual;
  std::vector<PointStatus> status;

  Index nx() const { return axes.x.count; }
  Index ny() const { return axes.y.count; }
  Index nt() const { return axes.t.count; }
  Index index(Index ix, Index iy, Index it) const { return ix + nx() * (iy + ny() * it); }
  Complex u_at(Index ix, Index iy, Index it) const {
    return u[static_cast<std::size_t>(index(ix, iy, it))];
  }
  bool ok(Index ix, Index iy, Index it) const {
    return status[static_cast<std::size_t>(index(ix, iy, it))] == PointStatus::Ok;
  }
  Index failures() const;
};

struct FieldOptions {
  int jobs = 1;
  bool rebalance = true;
};

/// Grid points run as independent tasks; results are stored by index so the
/// output does not depend on `jobs`.
FieldGrid compute_field(const DressedSystem& system, const GridAxes& axes,
                        const FieldOptions& options = {});
FieldGrid compute_field(const PointSet& q, const DressingSpec& spec, const GridAxes& axes,
                        int jobs = 1);

/// Inclusive physical box used to restrict residual norms.
struct Region {
  double x_lo, x_hi, y_lo, y_hi, t_lo, t_hi;
};

struct ResidualReport {
  Index offset_x = 3;
  Index offset_y = 1;
  Index offset_t = 1;
  Index nx = 0;  // interior extents
  Index ny = 0;
  Index nt = 0;
  std::vector<Complex> values;  // NaN where a stencil touches a failed point
  double max_norm = 0.0;
  double rms_norm = 0.0;
  Index evaluated = 0;
  Index skipped = 0;
};

/// Residual (4u_t + 6 u u_x - u_xxx)_x - 3 s u_yy with s = +1, or s = -1 on an
/// imaginary-y grid, by composed second-order central differences.
/// Needs nx >= 7, ny >= 3, nt >= 3.
ResidualReport kp_residual(const FieldGrid& field, const std::optional<Region>& region = {});

/// Residual at one interior point.
Complex kp_residual_at(const FieldGrid& field, Index ix, Index iy, Index it);

struct KdvReport {
  double max_im_u = 0.0;
  std::optional<double> max_u_y;  // needs ny >= 3
  std::optional<double> g_x_variation;
  std::optional<double> g_max_abs;
};

/// Reality, y-independence and x-independence of G = 4u_t + 6 u u_x - u_xxx.
KdvReport kdv_probe(const FieldGrid& field);

struct RealityReport {
  double max_im_real_y = 0.0;
  double max_im_imaginary_y = 0.0;
  bool kp2_real = false;
  bool kp1_real = false;
  std::string label;  // "kp2-real", "kp1-real", "both" or "neither"
};

RealityReport reality_probe_kp(const FieldGrid& real_y, const FieldGrid& imaginary_y,
                               double tol = 1e-8);

struct BandComparison {
  double eigenvalue = 0.0;
  Index nearest_band = -1;
  double band_lo = 0.0;
  double band_hi = 0.0;
  double distance = 0.0;  // zero when inside
};

struct SpectrumReport {
  std::vector<double> eigenvalues;
  std::vector<BandComparison> table;  // negative eigenvalues only
};

/// Lowest eigenvalues of -d^2/dx^2 + u on the interior nodes x_i = x_min + (i+1) h
/// with zero boundary values, compared against the bands {-c^2 : c in [l, r]}.
SpectrumReport schrodinger_spectrum_probe(const VectorXc& u_interior, double h, Index n_eigs,
                                          const IntervalList& spectral_support = {},
                                          double imag_tol = 1e-8);

}  // namespace fkp
