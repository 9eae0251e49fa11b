#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "fractal_kp/types.hpp"

namespace fkp {

using Rational = boost::multiprecision::cpp_rational;

inline constexpr std::size_t kDefaultNodeBudget = 4096;

/// z -> scale * z + shift, scale != 0.
struct AffineMap {
  Complex scale{1.0, 0.0};
  Complex shift{0.0, 0.0};

  Complex operator()(Complex z) const { return scale * z + shift; }
};

enum class FractalKind { CantorMiddleEps, SierpinskiGasket };

using Triangle = std::array<Complex, 3>;

/// Equilateral triangle with base [0, 1].
Triangle default_triangle();

struct FractalSpec {
  FractalKind kind = FractalKind::CantorMiddleEps;
  Rational eps{1, 3};  // removed middle fraction, Cantor only
  int level = 0;
  AffineMap embedding{};
  Triangle triangle = default_triangle();  // Sierpinski only
  std::size_t node_budget = kDefaultNodeBudget;
};

/// Ordered, pairwise distinct complex nodes carrying the uniform weight 1/N.
class PointSet {
 public:
  explicit PointSet(VectorXc nodes, std::string provenance = "explicit");

  const VectorXc& nodes() const { return nodes_; }
  Complex operator[](Index i) const { return nodes_[i]; }
  Index size() const { return nodes_.size(); }
  double weight() const { return 1.0 / static_cast<double>(nodes_.size()); }
  const std::string& provenance() const { return provenance_; }

  /// Largest distance between two nodes.
  double diameter() const;

 private:
  VectorXc nodes_;
  std::string provenance_;
};

struct Interval {
  double left;
  double right;
};
using IntervalList = std::vector<Interval>;

// Cantor middle-eps iteration on [0, 1]. Each step removes the open middle
// fraction eps of every interval, so 2^n intervals of length ((1-eps)/2)^n
// remain. Endpoints are computed exactly and rounded once.
IntervalList cantor_intervals(const Rational& eps, int level,
                              std::size_t node_budget = kDefaultNodeBudget);
IntervalList cantor_intervals(double eps, int level,
                              std::size_t node_budget = kDefaultNodeBudget);

/// The 2^(n+1) interval endpoints of the level-n iteration, ascending.
PointSet cantor_endpoints(const Rational& eps, int level,
                          std::size_t node_budget = kDefaultNodeBudget);
PointSet cantor_endpoints(double eps, int level,
                          std::size_t node_budget = kDefaultNodeBudget);

/// Midpoints of the 2^n level-n intervals (disjoint from every endpoint set).
PointSet cantor_midpoints(const Rational& eps, int level,
                          std::size_t node_budget = kDefaultNodeBudget);

/// Vertex set V_n of the level-n gasket; (3^(n+1)+3)/2 points, deduplicated on
/// exact lattice coordinates, ordered by (row, column) of the lattice.
PointSet sierpinski_vertices(int level, const Triangle& base = default_triangle(),
                             std::size_t node_budget = kDefaultNodeBudget);

/// Centroids of the 3^n level-n triangles.
PointSet sierpinski_face_centers(int level, const Triangle& base = default_triangle(),
                                 std::size_t node_budget = kDefaultNodeBudget);

/// The 3^n level-n triangles (useful for containment checks).
std::vector<Triangle> sierpinski_triangles(int level, const Triangle& base = default_triangle(),
                                           std::size_t node_budget = kDefaultNodeBudget);

/// Number of gasket vertices at a level, (3^(n+1)+3)/2.
std::size_t sierpinski_vertex_count(int level);

PointSet embed(const PointSet& points, Complex scale, Complex shift);
inline PointSet embed(const PointSet& points, const AffineMap& map) {
  return embed(points, map.scale, map.shift);
}

/// Level-n node family Q_n of a spec (endpoints or vertices), already embedded.
PointSet fractal_nodes(const FractalSpec& spec);

/// Staggered companion family (interval midpoints or face centres), embedded
/// with the same map. Disjoint from fractal_nodes at every level.
PointSet fractal_companion_nodes(const FractalSpec& spec);

/// (1/N) sum_j z_j^k.
Complex empirical_moment(const PointSet& points, int k);

/// Exact k-th moment of the limiting Cantor measure on [0, 1], from the
/// self-similarity X = rho X' or (1 - rho) + rho X' with probability 1/2 each.
Rational cantor_moment_exact(const Rational& eps, int k);
double cantor_moment_oracle(const Rational& eps, int k);
double cantor_moment_oracle(double eps, int k);

/// min |a - b| over a in A, b in B. Zero signals a shared point.
double min_pairwise_separation(const PointSet& a, const PointSet& b);

/// CSV with header "re,im,weight".
void write_point_set_csv(std::ostream& out, const PointSet& points);

}  // namespace fkp
