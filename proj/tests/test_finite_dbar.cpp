#include <doctest.h>

#include <cmath>
#include <random>

#include "fractal_kp/finite_dbar.hpp"

using namespace fkp;

namespace {

using Cl = std::complex<long double>;

PointSet points(std::initializer_list<Complex> zs) {
  VectorXc v(static_cast<Index>(zs.size()));
  Index i = 0;
  for (const Complex z : zs) v[i++] = z;
  return PointSet(v);
}

Cl widen(Complex z) { return {z.real(), z.imag()}; }
Complex narrow(Cl z) { return {static_cast<double>(z.real()), static_cast<double>(z.imag())}; }

// Cramer's rule for M x = r with M = I - diag(r) K, in long double.
std::array<Complex, 2> cramer(const std::array<std::array<Cl, 2>, 2>& k, const std::array<Cl, 2>& r) {
  const Cl m00 = 1.0L - r[0] * k[0][0], m01 = -r[0] * k[0][1];
  const Cl m10 = -r[1] * k[1][0], m11 = 1.0L - r[1] * k[1][1];
  const Cl det = m00 * m11 - m01 * m10;
  return {narrow((r[0] * m11 - m01 * r[1]) / det), narrow((m00 * r[1] - r[0] * m10) / det)};
}

const long double kPiL = 3.141592653589793238462643383279502884L;

PointSet cantor_q(int level, Complex scale = {1.0, 0.0}, Complex shift = {0.5, 0.0}) {
  return embed(cantor_endpoints(Rational{1, 3}, level), scale, shift);
}

}  // namespace

TEST_CASE("isometry") {
  const Isometry phi = Isometry::make(Complex{0.6, 0.8}, Complex{1.0, -2.0});
  const Complex z{0.3, 0.7};
  CHECK(std::abs(phi.inverse(phi(z)) - z) < 1e-15);
  CHECK(Isometry::reflection()(z) == -z);
  CHECK_THROWS_AS(Isometry::make(Complex{1.1, 0.0}, 0.0), DomainError);
}

TEST_CASE("zero amplitudes give the trivial solution") {
  auto q = cantor_q(2);
  auto sol = solve_one_component(q, VectorXc::Zero(q.size()), Isometry::reflection());
  CHECK(sol.a.cwiseAbs().maxCoeff() == 0.0);
  CHECK(eval_chi(sol, Complex{0.2, 3.0}) == Complex{1.0, 0.0});
  CHECK(nonlocal_residual(sol) == 0.0);

  auto r = Isometry::reflection().apply(embed(cantor_midpoints(Rational{1, 3}, 2), 1.0, 0.5));
  auto two = solve_two_component(q, r, VectorXc::Zero(q.size()), VectorXc::Zero(r.size()),
                                 Isometry::reflection());
  CHECK(two.a.cwiseAbs().maxCoeff() == 0.0);
  CHECK(two.b.cwiseAbs().maxCoeff() == 0.0);
  CHECK(eval_chi(two, Complex{-4.0, 1.0}) == Complex{1.0, 0.0});
}

TEST_CASE("single node: closed form") {
  // a = r (1 + a / (pi (phi(1) - 1))) with phi(1) = -1, r = pi  ->  a = 2 pi / 3.
  auto sol = solve_one_component(points({1.0}), VectorXc::Constant(1, kPi), Isometry::reflection());
  CHECK(std::abs(sol.a[0] - 2.0 * kPi / 3.0) <= 1e-13);

  // General: a = r / (1 - r / (pi (phi(l) - l))).
  const Isometry phi = Isometry::make(Complex{0.0, 1.0}, Complex{0.5, 0.0});
  for (const Complex lambda : {Complex{1.0, 1.0}, Complex{-0.3, 2.0}}) {
    for (const Complex r : {Complex{0.4, -0.1}, Complex{-2.0, 1.0}}) {
      const Complex expected = r / (1.0 - r / (kPi * (phi(lambda) - lambda)));
      auto s = solve_one_component(points({lambda}), VectorXc::Constant(1, r), phi);
      CHECK(std::abs(s.a[0] - expected) <= 1e-13 * std::abs(expected));
    }
  }
}

TEST_CASE("two nodes: Cramer oracle") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const Complex l0{1.0 + u(rng), u(rng)}, l1{1.0 + u(rng), 1.0 + u(rng)};
    const Isometry phi = Isometry::make(std::polar(1.0, 3.0 * u(rng)), Complex{3.0, 3.0 * u(rng)});
    const std::array<Complex, 2> lam{l0, l1};
    const VectorXc r = (VectorXc(2) << Complex{u(rng), u(rng)}, Complex{u(rng), u(rng)}).finished();
    std::array<std::array<Cl, 2>, 2> k{};
    for (int j = 0; j < 2; ++j) {
      for (int m = 0; m < 2; ++m) k[j][m] = 1.0L / (kPiL * 2.0L * (widen(phi(lam[j])) - widen(lam[m])));
    }
    const auto oracle = cramer(k, {widen(r[0]), widen(r[1])});
    auto sol = solve_one_component(points({l0, l1}), r, phi);
    for (int j = 0; j < 2; ++j) CHECK(std::abs(sol.a[j] - oracle[j]) <= 1e-12 * std::abs(oracle[j]));
  }
}

TEST_CASE("two-component with one node each: Cramer oracle") {
  const Isometry phi = Isometry::reflection();
  const Complex q{0.7, 0.2}, rho{-1.3, 0.4};
  const Complex r1{0.9, -0.3}, r2{-0.4, 0.6};
  // a = r1 (1 + (1/pi)[a/(phi(q)-q) + b/(phi(q)-rho)]),
  // b = r2 (1 + (1/pi)[a/(phi^-1(rho)-q) + b/(phi^-1(rho)-rho)]).
  const Cl zq = widen(phi(q)), zr = widen(phi.inverse(rho));
  std::array<std::array<Cl, 2>, 2> k{};
  k[0][0] = 1.0L / (kPiL * (zq - widen(q)));
  k[0][1] = 1.0L / (kPiL * (zq - widen(rho)));
  k[1][0] = 1.0L / (kPiL * (zr - widen(q)));
  k[1][1] = 1.0L / (kPiL * (zr - widen(rho)));
  const auto oracle = cramer(k, {widen(r1), widen(r2)});
  auto sol = solve_two_component(points({q}), points({rho}), VectorXc::Constant(1, r1),
                                 VectorXc::Constant(1, r2), phi);
  CHECK(std::abs(sol.a[0] - oracle[0]) <= 1e-12 * std::abs(oracle[0]));
  CHECK(std::abs(sol.b[0] - oracle[1]) <= 1e-12 * std::abs(oracle[1]));
}

TEST_CASE("property: decoupling when r2 vanishes") {
  for (int level : {1, 3}) {
    auto q = cantor_q(level, Complex{0.8, 0.6}, Complex{0.3, 0.2});
    const Isometry phi = Isometry::reflection();
    auto r = phi.apply(embed(cantor_midpoints(Rational{1, 3}, level), Complex{0.8, 0.6}, Complex{0.3, 0.2}));
    VectorXc r1(q.size());
    for (Index j = 0; j < q.size(); ++j) r1[j] = Complex{0.5, 0.1 * static_cast<double>(j)};
    auto one = solve_one_component(q, r1, phi);
    auto two = solve_two_component(q, r, r1, VectorXc::Zero(r.size()), phi);
    CHECK(two.b.cwiseAbs().maxCoeff() == 0.0);
    CHECK((two.a - one.a).cwiseAbs().maxCoeff() <= 1e-14 * one.a.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("property: small-amplitude scaling") {
  auto q = cantor_q(3);
  VectorXc r0(q.size());
  for (Index j = 0; j < q.size(); ++j) r0[j] = Complex{1.0, std::sin(static_cast<double>(j))};
  double previous = INFINITY;
  for (const double c : {1e-1, 1e-2, 1e-3}) {
    auto sol = solve_one_component(q, c * r0, Isometry::reflection());
    const double defect = (sol.a - c * r0).cwiseAbs().maxCoeff();
    CHECK(defect <= 2.0 * c * c * r0.cwiseAbs().maxCoeff());
    if (std::isfinite(previous)) CHECK(defect / previous == doctest::Approx(0.01).epsilon(0.2));
    previous = defect;
  }
}

TEST_CASE("chi: normalisation, residues and the nonlocal conditions") {
  auto q = cantor_q(3, Complex{1.0, 0.5}, Complex{0.2, 0.1});
  const Isometry phi = Isometry::make(Complex{0.0, 1.0}, Complex{-2.0, 0.0});
  VectorXc r(q.size());
  for (Index j = 0; j < q.size(); ++j) r[j] = Complex{0.3 + 0.05 * static_cast<double>(j), -0.2};
  auto sol = solve_one_component(q, r, phi);

  CHECK(std::abs(eval_chi(sol, Complex{1e8, 1e8}) - 1.0) <= 1e-6);
  const Complex far = 1e7 * Complex{0.0, 1.0};
  CHECK(std::abs(far * (eval_chi(sol, far) - 1.0) - chi_first_moment(sol)) <= 1e-5);

  const double n = static_cast<double>(q.size());
  for (Index j : {Index{0}, Index{7}, Index{15}}) {
    const Complex expected = sol.a[j] / (kPi * n);
    double previous = INFINITY;
    for (const double delta : {1e-4, 1e-6, 1e-8}) {
      const Complex lambda = q[j] + delta * Complex{0.6, 0.8};
      const double err = std::abs((lambda - q[j]) * eval_chi(sol, lambda) - expected);
      CHECK(err < previous);
      previous = err;
    }
    CHECK(previous <= 1e-5 * std::abs(expected));
  }

  const double res = nonlocal_residual(sol);
  CHECK(res <= 1e-9 * sol.report.condition_estimate);
  auto perturbed = sol;
  perturbed.a[3] += 1e-3;
  CHECK(nonlocal_residual(perturbed) >= 1e-4);
}

TEST_CASE("two-component residual and warnings") {
  FractalSpec spec;
  spec.level = 3;
  spec.embedding = AffineMap{Complex{0.8, 0.6}, Complex{0.4, 0.3}};
  auto q = fractal_nodes(spec);
  const Isometry phi = Isometry::reflection();
  auto r = phi.apply(fractal_companion_nodes(spec));
  auto sol = solve_two_component(q, r, VectorXc::Constant(q.size(), Complex{0.7, 0.2}),
                                 VectorXc::Constant(r.size(), Complex{-0.3, 0.1}), phi);
  CHECK(nonlocal_residual(sol) <= 1e-9 * sol.report.condition_estimate);
  CHECK(sol.warnings.empty());
  auto perturbed = sol;
  perturbed.b[0] += 1e-3;
  CHECK(nonlocal_residual(perturbed) >= 1e-4);

  // A partner family crowding phi(Q) triggers the conditioning warning.
  VectorXc close = phi.apply(q).nodes().array() + Complex{1e-5, 0.0};
  auto tight = solve_two_component(q, PointSet(close), VectorXc::Constant(q.size(), 0.1),
                                   VectorXc::Constant(q.size(), 0.1), phi);
  CHECK_FALSE(tight.warnings.empty());
}

TEST_CASE("disjointness is certified") {
  // Both contain 0 under phi = -lambda.
  auto p1 = cantor_endpoints(Rational{1, 3}, 1);
  CHECK_THROWS_AS(solve_one_component(p1, VectorXc::Ones(4), Isometry::reflection()), CoincidenceError);
  auto q = cantor_q(1);
  CHECK_THROWS_AS(solve_two_component(q, Isometry::reflection().apply(q), VectorXc::Ones(4),
                                      VectorXc::Ones(4), Isometry::reflection()),
                  CoincidenceError);
  CHECK_THROWS_AS(solve_one_component(q, VectorXc::Ones(3), Isometry::reflection()), DomainError);
}

TEST_CASE("solution csv export") {
  auto sol = solve_one_component(points({1.0}), VectorXc::Constant(1, kPi), Isometry::reflection());
  std::ostringstream out;
  write_solution_csv(out, sol);
  const std::string text = out.str();
  CHECK(text.rfind("block,index,node_re,node_im,coef_re,coef_im\n", 0) == 0);
  CHECK(text.find("a,0,1,0,2.0943951023931") != std::string::npos);
}
