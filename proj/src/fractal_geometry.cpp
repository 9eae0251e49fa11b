#include "fractal_kp/fractal_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>
#include <utility>

#include <fmt/format.h>

namespace fkp {

namespace {

Rational to_rational(double value) {
  if (!std::isfinite(value)) throw DomainError("eps must be finite");
  int exponent = 0;
  const double mantissa = std::frexp(value, &exponent);
  // 53 significant bits fit exactly in an int64 numerator.
  const auto numerator = static_cast<std::int64_t>(std::ldexp(mantissa, 53));
  Rational result{numerator};
  const int shift = exponent - 53;
  const Rational two{2};
  if (shift >= 0) {
    for (int i = 0; i < shift; ++i) result *= two;
  } else {
    for (int i = 0; i < -shift; ++i) result /= two;
  }
  return result;
}

void check_eps(const Rational& eps) {
  if (eps <= 0 || eps >= 1) {
    throw DomainError(fmt::format("eps outside (0,1): {}", eps.str()));
  }
}

void check_level(int level) {
  if (level < 0) throw DomainError(fmt::format("level must be nonnegative, got {}", level));
}

void check_budget(std::size_t count, std::size_t budget, const char* what) {
  if (count > budget) {
    throw DomainError(fmt::format("{} needs {} nodes, exceeding the node budget {}", what, count,
                                  budget));
  }
}

std::size_t pow_size(std::size_t base, int exponent) {
  std::size_t result = 1;
  for (int i = 0; i < exponent; ++i) {
    if (result > std::numeric_limits<std::size_t>::max() / base) {
      return std::numeric_limits<std::size_t>::max();
    }
    result *= base;
  }
  return result;
}

struct RationalInterval {
  Rational left;
  Rational right;
};

std::vector<RationalInterval> exact_cantor_intervals(const Rational& eps, int level) {
  const Rational rho = (Rational{1} - eps) / 2;
  std::vector<RationalInterval> intervals{{Rational{0}, Rational{1}}};
  for (int step = 0; step < level; ++step) {
    std::vector<RationalInterval> next;
    next.reserve(intervals.size() * 2);
    for (const auto& [left, right] : intervals) {
      const Rational piece = rho * (right - left);
      next.push_back({left, left + piece});
      next.push_back({right - piece, right});
    }
    intervals = std::move(next);
  }
  return intervals;
}

double to_double(const Rational& value) { return value.convert_to<double>(); }

// Lattice triangle in units of 2^-level along the two base edges.
struct LatticeTriangle {
  std::int64_t a;
  std::int64_t b;
  std::int64_t size;
};

std::vector<LatticeTriangle> lattice_triangles(int level) {
  std::vector<LatticeTriangle> triangles{{0, 0, std::int64_t{1} << level}};
  for (int step = 0; step < level; ++step) {
    std::vector<LatticeTriangle> next;
    next.reserve(triangles.size() * 3);
    for (const auto& t : triangles) {
      const std::int64_t half = t.size / 2;
      next.push_back({t.a, t.b, half});
      next.push_back({t.a + half, t.b, half});
      next.push_back({t.a, t.b + half, half});
    }
    triangles = std::move(next);
  }
  return triangles;
}

void check_triangle(const Triangle& base) {
  const Complex e1 = base[1] - base[0];
  const Complex e2 = base[2] - base[0];
  const double area2 = std::abs((std::conj(e1) * e2).imag());
  const double scale = std::max(std::norm(e1), std::norm(e2));
  if (!(area2 > 1e-14 * scale)) throw DomainError("degenerate (collinear) base triangle");
}

void check_sierpinski_level(int level) {
  check_level(level);
  if (level > 30) throw DomainError(fmt::format("Sierpinski level {} too large", level));
}

Complex lattice_point(const Triangle& base, double u, double v) {
  return base[0] + u * (base[1] - base[0]) + v * (base[2] - base[0]);
}

}  // namespace

Triangle default_triangle() {
  return {Complex{0.0, 0.0}, Complex{1.0, 0.0}, Complex{0.5, std::sqrt(3.0) / 2.0}};
}

PointSet::PointSet(VectorXc nodes, std::string provenance)
    : nodes_(std::move(nodes)), provenance_(std::move(provenance)) {
  if (nodes_.size() == 0) throw DomainError("point set must be nonempty");
  std::vector<Index> order(static_cast<std::size_t>(nodes_.size()));
  std::iota(order.begin(), order.end(), Index{0});
  auto key = [this](Index i) { return std::pair{nodes_[i].real(), nodes_[i].imag()}; };
  std::sort(order.begin(), order.end(), [&](Index i, Index j) { return key(i) < key(j); });
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (!std::isfinite(nodes_[order[i]].real()) || !std::isfinite(nodes_[order[i]].imag())) {
      throw DomainError(fmt::format("node {} is not finite", order[i]));
    }
    if (i > 0 && key(order[i]) == key(order[i - 1])) {
      throw DomainError(
          fmt::format("nodes {} and {} coincide", order[i - 1], order[i]));
    }
  }
}

double PointSet::diameter() const {
  double d = 0.0;
  for (Index i = 0; i < size(); ++i) {
    for (Index j = i + 1; j < size(); ++j) d = std::max(d, std::abs(nodes_[i] - nodes_[j]));
  }
  return d;
}

IntervalList cantor_intervals(const Rational& eps, int level, std::size_t node_budget) {
  check_eps(eps);
  check_level(level);
  check_budget(pow_size(2, level), node_budget, "Cantor intervals");
  IntervalList result;
  for (const auto& [left, right] : exact_cantor_intervals(eps, level)) {
    result.push_back({to_double(left), to_double(right)});
  }
  return result;
}

IntervalList cantor_intervals(double eps, int level, std::size_t node_budget) {
  return cantor_intervals(to_rational(eps), level, node_budget);
}

PointSet cantor_endpoints(const Rational& eps, int level, std::size_t node_budget) {
  check_eps(eps);
  check_level(level);
  check_budget(pow_size(2, level + 1), node_budget, "Cantor endpoints");
  const auto intervals = exact_cantor_intervals(eps, level);
  VectorXc nodes(static_cast<Index>(2 * intervals.size()));
  Index k = 0;
  for (const auto& [left, right] : intervals) {
    nodes[k++] = to_double(left);
    nodes[k++] = to_double(right);
  }
  return PointSet(std::move(nodes), fmt::format("cantor_endpoints(eps={}, n={})", eps.str(), level));
}

PointSet cantor_endpoints(double eps, int level, std::size_t node_budget) {
  return cantor_endpoints(to_rational(eps), level, node_budget);
}

PointSet cantor_midpoints(const Rational& eps, int level, std::size_t node_budget) {
  check_eps(eps);
  check_level(level);
  check_budget(pow_size(2, level), node_budget, "Cantor midpoints");
  const auto intervals = exact_cantor_intervals(eps, level);
  VectorXc nodes(static_cast<Index>(intervals.size()));
  Index k = 0;
  for (const auto& [left, right] : intervals) nodes[k++] = to_double((left + right) / 2);
  return PointSet(std::move(nodes), fmt::format("cantor_midpoints(eps={}, n={})", eps.str(), level));
}

std::size_t sierpinski_vertex_count(int level) {
  check_sierpinski_level(level);
  return (pow_size(3, level + 1) + 3) / 2;
}

PointSet sierpinski_vertices(int level, const Triangle& base, std::size_t node_budget) {
  check_sierpinski_level(level);
  check_triangle(base);
  check_budget(sierpinski_vertex_count(level), node_budget, "Sierpinski vertices");
  // (row, column) so that the set order runs along the base edge first.
  std::set<std::pair<std::int64_t, std::int64_t>> lattice;
  for (const auto& t : lattice_triangles(level)) {
    lattice.insert({t.b, t.a});
    lattice.insert({t.b, t.a + t.size});
    lattice.insert({t.b + t.size, t.a});
  }
  const double unit = std::ldexp(1.0, -level);
  VectorXc nodes(static_cast<Index>(lattice.size()));
  Index k = 0;
  for (const auto& [row, column] : lattice) {
    nodes[k++] = lattice_point(base, static_cast<double>(column) * unit,
                               static_cast<double>(row) * unit);
  }
  return PointSet(std::move(nodes), fmt::format("sierpinski_vertices(n={})", level));
}

PointSet sierpinski_face_centers(int level, const Triangle& base, std::size_t node_budget) {
  check_sierpinski_level(level);
  check_triangle(base);
  check_budget(pow_size(3, level), node_budget, "Sierpinski face centres");
  const auto triangles = lattice_triangles(level);
  const double unit = std::ldexp(1.0, -level) / 3.0;
  VectorXc nodes(static_cast<Index>(triangles.size()));
  Index k = 0;
  for (const auto& t : triangles) {
    nodes[k++] = lattice_point(base, static_cast<double>(3 * t.a + t.size) * unit,
                               static_cast<double>(3 * t.b + t.size) * unit);
  }
  return PointSet(std::move(nodes), fmt::format("sierpinski_face_centers(n={})", level));
}

std::vector<Triangle> sierpinski_triangles(int level, const Triangle& base,
                                           std::size_t node_budget) {
  check_sierpinski_level(level);
  check_triangle(base);
  check_budget(pow_size(3, level), node_budget, "Sierpinski triangles");
  const double unit = std::ldexp(1.0, -level);
  std::vector<Triangle> result;
  for (const auto& t : lattice_triangles(level)) {
    const auto a = static_cast<double>(t.a) * unit;
    const auto b = static_cast<double>(t.b) * unit;
    const auto s = static_cast<double>(t.size) * unit;
    result.push_back({lattice_point(base, a, b), lattice_point(base, a + s, b),
                      lattice_point(base, a, b + s)});
  }
  return result;
}

PointSet embed(const PointSet& points, Complex scale, Complex shift) {
  if (scale == Complex{0.0, 0.0}) throw DomainError("embedding scale must be nonzero");
  VectorXc mapped = (scale * points.nodes().array() + shift).matrix();
  return PointSet(std::move(mapped), points.provenance());
}

PointSet fractal_nodes(const FractalSpec& spec) {
  if (spec.kind == FractalKind::CantorMiddleEps) {
    return embed(cantor_endpoints(spec.eps, spec.level, spec.node_budget), spec.embedding);
  }
  return embed(sierpinski_vertices(spec.level, spec.triangle, spec.node_budget), spec.embedding);
}

PointSet fractal_companion_nodes(const FractalSpec& spec) {
  if (spec.kind == FractalKind::CantorMiddleEps) {
    return embed(cantor_midpoints(spec.eps, spec.level, spec.node_budget), spec.embedding);
  }
  return embed(sierpinski_face_centers(spec.level, spec.triangle, spec.node_budget),
               spec.embedding);
}

Complex empirical_moment(const PointSet& points, int k) {
  if (k < 0) throw DomainError("moment order must be nonnegative");
  Complex sum{0.0, 0.0};
  for (Index j = 0; j < points.size(); ++j) sum += std::pow(points[j], k);
  return sum * points.weight();
}

static Rational rational_pow(const Rational& base, int exponent) {
  Rational out{1};
  for (int i = 0; i < exponent; ++i) out *= base;
  return out;
}

Rational cantor_moment_exact(const Rational& eps, int k) {
  check_eps(eps);
  if (k < 0) throw DomainError("moment order must be nonnegative");
  const Rational rho = (Rational{1} - eps) / 2;
  const Rational gap = Rational{1} - rho;
  std::vector<Rational> moments{Rational{1}};
  for (int order = 1; order <= k; ++order) {
    // m_k (1 - rho^k) = 1/2 sum_{i<k} C(k,i) (1-rho)^(k-i) rho^i m_i
    Rational sum{0};
    Rational binomial{1};
    for (int i = 0; i < order; ++i) {
      sum += binomial * rational_pow(gap, order - i) *
             rational_pow(rho, i) * moments[i];
      binomial = binomial * (order - i) / (i + 1);
    }
    moments.push_back(sum / 2 /
                      (Rational{1} - rational_pow(rho, order)));
  }
  return moments.back();
}

double cantor_moment_oracle(const Rational& eps, int k) {
  return to_double(cantor_moment_exact(eps, k));
}

double cantor_moment_oracle(double eps, int k) {
  return cantor_moment_oracle(to_rational(eps), k);
}

double min_pairwise_separation(const PointSet& a, const PointSet& b) {
  double best = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < a.size(); ++i) {
    for (Index j = 0; j < b.size(); ++j) best = std::min(best, std::abs(a[i] - b[j]));
  }
  return best;
}

void write_point_set_csv(std::ostream& out, const PointSet& points) {
  out << "re,im,weight\n";
  for (Index j = 0; j < points.size(); ++j) {
    out << fmt::format("{:.17g},{:.17g},{:.17g}\n", points[j].real(), points[j].imag(),
                       points.weight());
  }
}

}  // namespace fkp
