#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "fractal_kp/fractal_geometry.hpp"

using namespace fkp;

namespace {

bool contains(const PointSet& set, Complex z, double tol = 1e-15) {
  for (Index i = 0; i < set.size(); ++i) {
    if (std::abs(set[i] - z) <= tol) return true;
  }
  return false;
}

// Independent vertex enumeration: recursive midpoint subdivision with points
// keyed on their rounded coordinates.
std::size_t enumerate_gasket_vertices(int level) {
  std::vector<Triangle> tris{default_triangle()};
  for (int n = 0; n < level; ++n) {
    std::vector<Triangle> next;
    for (const auto& t : tris) {
      const Complex m01 = (t[0] + t[1]) / 2.0, m12 = (t[1] + t[2]) / 2.0, m02 = (t[0] + t[2]) / 2.0;
      next.push_back({t[0], m01, m02});
      next.push_back({m01, t[1], m12});
      next.push_back({m02, m12, t[2]});
    }
    tris = std::move(next);
  }
  std::set<std::pair<long long, long long>> keys;
  for (const auto& t : tris) {
    for (const Complex z : t) keys.insert({std::llround(z.real() * 1e9), std::llround(z.imag() * 1e9)});
  }
  return keys.size();
}

bool inside_triangle(const Triangle& t, Complex z, double tol = 1e-12) {
  auto cross = [](Complex a, Complex b) { return a.real() * b.imag() - a.imag() * b.real(); };
  const double area = cross(t[1] - t[0], t[2] - t[0]);
  const double l1 = cross(t[1] - z, t[2] - z) / area;
  const double l2 = cross(t[2] - z, t[0] - z) / area;
  const double l3 = 1.0 - l1 - l2;
  return l1 >= -tol && l2 >= -tol && l3 >= -tol;
}

}  // namespace

TEST_CASE("cantor intervals: base case and first steps") {
  auto i0 = cantor_intervals(Rational{1, 3}, 0);
  REQUIRE(i0.size() == 1);
  CHECK(i0[0].left == 0.0);
  CHECK(i0[0].right == 1.0);

  auto i1 = cantor_intervals(Rational{1, 3}, 1);
  REQUIRE(i1.size() == 2);
  CHECK(i1[0].left == 0.0);
  CHECK(i1[0].right == doctest::Approx(1.0 / 3.0).epsilon(1e-16));
  CHECK(i1[1].left == doctest::Approx(2.0 / 3.0).epsilon(1e-16));
  CHECK(i1[1].right == 1.0);

  // eps = 1/2: rho = 1/4, so four intervals of length 1/16.
  auto half = cantor_intervals(0.5, 2);
  REQUIRE(half.size() == 4);
  for (const auto& iv : half) CHECK(iv.right - iv.left == doctest::Approx(1.0 / 16.0).epsilon(1e-15));
}

TEST_CASE("cantor endpoints: counts, weights and exact values") {
  auto p0 = cantor_endpoints(Rational{1, 3}, 0);
  REQUIRE(p0.size() == 2);
  CHECK(p0.weight() == 0.5);
  CHECK(p0[0] == Complex{0.0, 0.0});
  CHECK(p0[1] == Complex{1.0, 0.0});

  auto p1 = cantor_endpoints(Rational{1, 3}, 1);
  REQUIRE(p1.size() == 4);
  CHECK(p1.weight() == 0.25);
  CHECK(p1[1].real() == 1.0 / 3.0);
  CHECK(p1[2].real() == 2.0 / 3.0);

  for (int n = 0; n <= 10; ++n) CHECK(cantor_endpoints(Rational{1, 3}, n).size() == (Index{2} << n));

  // Rounded once from the exact rational: 2/9 and 7/9 at level 2.
  auto p2 = cantor_endpoints(Rational{1, 3}, 2);
  CHECK(p2[2].real() == 2.0 / 9.0);
  CHECK(p2[5].real() == 7.0 / 9.0);
}

TEST_CASE("cantor and sierpinski nesting") {
  for (int n = 0; n < 8; ++n) {
    auto coarse = cantor_endpoints(Rational{1, 3}, n);
    auto fine = cantor_endpoints(Rational{1, 3}, n + 1);
    for (Index i = 0; i < coarse.size(); ++i) CHECK(contains(fine, coarse[i], 0.0));
  }
  for (int n = 0; n < 5; ++n) {
    auto coarse = sierpinski_vertices(n);
    auto fine = sierpinski_vertices(n + 1);
    for (Index i = 0; i < coarse.size(); ++i) CHECK(contains(fine, coarse[i], 1e-15));
  }
}

TEST_CASE("endpoints lie in their level's intervals; vertices in their level's triangles") {
  for (int n = 0; n <= 6; ++n) {
    auto points = cantor_endpoints(Rational{1, 3}, n);
    auto intervals = cantor_intervals(Rational{1, 3}, n);
    for (Index i = 0; i < points.size(); ++i) {
      bool found = false;
      for (const auto& iv : intervals) found |= points[i].real() >= iv.left && points[i].real() <= iv.right;
      CHECK(found);
    }
  }
  for (int n = 0; n <= 4; ++n) {
    auto vertices = sierpinski_vertices(n);
    auto tris = sierpinski_triangles(n);
    for (Index i = 0; i < vertices.size(); ++i) {
      bool found = false;
      for (const auto& t : tris) found |= inside_triangle(t, vertices[i]);
      CHECK(found);
    }
  }
}

TEST_CASE("sierpinski vertex counts match independent enumeration") {
  auto v0 = sierpinski_vertices(0);
  REQUIRE(v0.size() == 3);
  for (const Complex z : default_triangle()) CHECK(contains(v0, z));
  CHECK(sierpinski_vertices(1).size() == 6);
  CHECK(sierpinski_vertices(2).size() == 15);
  std::size_t v = 3;
  for (int n = 0; n <= 6; ++n) {
    const auto count = sierpinski_vertices(n).size();
    CHECK(static_cast<std::size_t>(count) == v);
    CHECK(sierpinski_vertex_count(n) == v);
    CHECK(enumerate_gasket_vertices(n) == v);
    v = 3 * v - 3;
  }
}

TEST_CASE("sierpinski face centres are the centroids of the level triangles") {
  auto centers = sierpinski_face_centers(2);
  auto tris = sierpinski_triangles(2);
  REQUIRE(centers.size() == 9);
  for (const auto& t : tris) CHECK(contains(centers, (t[0] + t[1] + t[2]) / 3.0, 1e-14));
  CHECK(min_pairwise_separation(centers, sierpinski_vertices(2)) > 0.05);
}

TEST_CASE("embedding") {
  auto p = cantor_endpoints(Rational{1, 3}, 0);
  auto same = embed(p, Complex{1.0, 0.0}, Complex{0.0, 0.0});
  CHECK(same.nodes() == p.nodes());
  auto rotated = embed(p, Complex{0.0, 1.0}, Complex{0.0, 0.0});
  CHECK(rotated[0] == Complex{0.0, 0.0});
  CHECK(rotated[1] == Complex{0.0, 1.0});

  const Complex scale{0.6, -0.8}, shift{2.0, 1.0};
  auto p3 = cantor_endpoints(Rational{1, 3}, 3);
  auto e3 = embed(p3, scale, shift);
  const Complex m1 = empirical_moment(p3, 1);
  CHECK(std::abs(empirical_moment(e3, 1) - (scale * m1 + shift)) < 1e-15);
  CHECK_THROWS_AS(embed(p3, Complex{0.0, 0.0}, shift), DomainError);
}

TEST_CASE("empirical moments") {
  CHECK(empirical_moment(cantor_endpoints(Rational{1, 3}, 0), 1) == Complex{0.5, 0.0});
  CHECK(empirical_moment(cantor_endpoints(Rational{1, 3}, 1), 2).real() ==
        doctest::Approx(7.0 / 18.0).epsilon(1e-15));
  CHECK(empirical_moment(sierpinski_vertices(3), 0) == Complex{1.0, 0.0});
  // Symmetric construction: the mean is the midpoint exactly.
  for (int n = 0; n <= 10; ++n) {
    CHECK(empirical_moment(cantor_endpoints(Rational{1, 3}, n), 1).real() == doctest::Approx(0.5).epsilon(1e-15));
  }
  CHECK_THROWS_AS(empirical_moment(cantor_endpoints(Rational{1, 3}, 0), -1), DomainError);
}

TEST_CASE("cantor moment oracle against closed forms") {
  // From X = rho X' + (1-rho) B: m2 = 1/(2(1+rho)); symmetry about 1/2 gives
  // m3 = (3/2) m2 - 1/4.
  CHECK(cantor_moment_oracle(Rational{1, 3}, 0) == 1.0);
  CHECK(cantor_moment_oracle(Rational{1, 3}, 1) == 0.5);
  CHECK(cantor_moment_exact(Rational{1, 3}, 2) == Rational{3, 8});
  CHECK(cantor_moment_exact(Rational{1, 3}, 3) == Rational{5, 16});
  CHECK(cantor_moment_exact(Rational{1, 2}, 2) == Rational{2, 5});
  CHECK(cantor_moment_oracle(0.5, 2) == doctest::Approx(0.4).epsilon(1e-15));
}

TEST_CASE("property: moment errors are nonincreasing from level 2 and shrink to zero") {
  for (int k = 1; k <= 4; ++k) {
    const double oracle = cantor_moment_oracle(Rational{1, 3}, k);
    double previous = INFINITY;
    for (int n = 2; n <= 12; ++n) {
      const double err = std::abs(empirical_moment(cantor_endpoints(Rational{1, 3}, n, 8192), k) - oracle);
      CHECK(err <= previous + 1e-15);
      previous = err;
    }
    CHECK(previous < 1e-5);
  }
}

TEST_CASE("min pairwise separation") {
  auto zero = PointSet(VectorXc::Constant(1, Complex{0.0, 0.0}));
  auto one = PointSet(VectorXc::Constant(1, Complex{1.0, 0.0}));
  VectorXc both(2);
  both << 0.0, 1.0;
  CHECK(min_pairwise_separation(zero, one) == 1.0);
  CHECK(min_pairwise_separation(PointSet(both), one) == 0.0);
  auto p1 = cantor_endpoints(Rational{1, 3}, 1);
  CHECK(min_pairwise_separation(p1, embed(p1, Complex{-1.0, 0.0}, Complex{0.0, 0.0})) == 0.0);
}

TEST_CASE("error paths") {
  CHECK_THROWS_AS(cantor_intervals(1.5, 1), DomainError);
  CHECK_THROWS_AS(cantor_endpoints(0.0, 1), DomainError);
  CHECK_THROWS_AS(cantor_endpoints(Rational{1, 3}, -1), DomainError);
  CHECK_THROWS_AS(cantor_endpoints(Rational{1, 3}, 12), DomainError);  // 8192 > budget
  CHECK(cantor_endpoints(Rational{1, 3}, 12, 8192).size() == 8192);
  Triangle flat{Complex{0.0, 0.0}, Complex{1.0, 0.0}, Complex{2.0, 0.0}};
  CHECK_THROWS_AS(sierpinski_vertices(1, flat), DomainError);
  CHECK_THROWS_AS([] { return PointSet(VectorXc()); }(), DomainError);
  VectorXc dup(2);
  dup << 1.0, 1.0;
  CHECK_THROWS_AS([&] { return PointSet(dup); }(), DomainError);
  try {
    cantor_intervals(1.5, 1);
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("eps outside (0,1)") != std::string::npos);
  }
}

TEST_CASE("point set csv export") {
  std::ostringstream out;
  write_point_set_csv(out, cantor_endpoints(Rational{1, 3}, 0));
  CHECK(out.str() == "re,im,weight\n0,0,0.5\n1,0,0.5\n");
}

TEST_CASE("fractal specs dispatch to the right families") {
  FractalSpec spec;
  spec.level = 2;
  spec.embedding = AffineMap{Complex{2.0, 0.0}, Complex{1.0, 0.0}};
  auto q = fractal_nodes(spec);
  CHECK(q.size() == 8);
  CHECK(q[0] == Complex{1.0, 0.0});
  auto mid = fractal_companion_nodes(spec);
  CHECK(mid.size() == 4);
  CHECK(min_pairwise_separation(q, mid) > 0.1);
  spec.kind = FractalKind::SierpinskiGasket;
  CHECK(fractal_nodes(spec).size() == 15);
  CHECK(fractal_companion_nodes(spec).size() == 9);
}
