#include "fractal_kp/amplitude.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace fkp {

Complex evaluate(const AmplitudeSpec& spec, Complex s) {
  switch (spec.family) {
    case AmplitudeFamily::Constant:
      return spec.value;
    case AmplitudeFamily::Polynomial: {
      Complex acc{0.0, 0.0};
      for (auto it = spec.coefficients.rbegin(); it != spec.coefficients.rend(); ++it) {
        acc = acc * s + *it;
      }
      return acc;
    }
    case AmplitudeFamily::GaussianBump: {
      if (!(spec.width > 0.0)) throw DomainError("gaussian width must be positive");
      return spec.amplitude * std::exp(-std::norm(s - spec.center) / (2.0 * spec.width * spec.width));
    }
    case AmplitudeFamily::TableLookup: {
      if (spec.table.empty()) throw DomainError("amplitude table is empty");
      double best = std::numeric_limits<double>::infinity();
      Complex value{0.0, 0.0};
      for (const auto& [at, v] : spec.table) {
        const double d = std::abs(at - s);
        if (d < best) {
          best = d;
          value = v;
        }
      }
      return value;
    }
  }
  throw DomainError("unknown amplitude family");
}

VectorXc sample(const AmplitudeSpec& spec, const VectorXc& nodes) {
  VectorXc out(nodes.size());
  for (Index j = 0; j < nodes.size(); ++j) {
    const Complex v = evaluate(spec, nodes[j]);
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
      throw DomainError(fmt::format("amplitude is not finite at node {}", j));
    }
    if (spec.sign != SignConstraint::None) {
      const bool real = std::abs(v.imag()) <= 1e-14 * std::max(1.0, std::abs(v.real()));
      const bool sign_ok =
          spec.sign == SignConstraint::NonNegative ? v.real() >= 0.0 : v.real() <= 0.0;
      if (!real || !sign_ok) {
        throw DomainError(fmt::format("amplitude violates the {} constraint at node {} (value {}{:+}i)",
                                      to_string(spec.sign), j, v.real(), v.imag()));
      }
    }
    out[j] = v;
  }
  return out;
}

std::string to_string(AmplitudeFamily family) {
  switch (family) {
    case AmplitudeFamily::Constant: return "constant";
    case AmplitudeFamily::Polynomial: return "polynomial";
    case AmplitudeFamily::GaussianBump: return "gaussian";
    case AmplitudeFamily::TableLookup: return "table";
  }
  return "unknown";
}

std::string to_string(SignConstraint sign) {
  switch (sign) {
    case SignConstraint::None: return "none";
    case SignConstraint::NonNegative: return "nonnegative";
    case SignConstraint::NonPositive: return "nonpositive";
  }
  return "unknown";
}

}  // namespace fkp
