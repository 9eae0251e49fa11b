#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fractal_kp/fractal_geometry.hpp"

namespace fkp {

enum class AmplitudeFamily { Constant, Polynomial, GaussianBump, TableLookup };
enum class SignConstraint { None, NonNegative, NonPositive };

/// An evaluable amplitude r~(s) on the spectral variable.
struct AmplitudeSpec {
  AmplitudeFamily family = AmplitudeFamily::Constant;
  Complex value{0.0, 0.0};             // Constant
  std::vector<Complex> coefficients;   // Polynomial: c0 + c1 s + c2 s^2 + ...
  Complex amplitude{1.0, 0.0};         // GaussianBump: amplitude exp(-|s - center|^2 / (2 width^2))
  Complex center{0.0, 0.0};
  double width = 1.0;
  std::vector<std::pair<Complex, Complex>> table;  // TableLookup: (location, value), nearest wins
  SignConstraint sign = SignConstraint::None;

  static AmplitudeSpec constant(Complex v, SignConstraint sign = SignConstraint::None) {
    AmplitudeSpec a;
    a.value = v;
    a.sign = sign;
    return a;
  }
};

Complex evaluate(const AmplitudeSpec& spec, Complex s);

/// Samples at every node and enforces the sign constraint (values must be real
/// with the declared sign). Throws DomainError naming the first offending node.
VectorXc sample(const AmplitudeSpec& spec, const VectorXc& nodes);
inline VectorXc sample(const AmplitudeSpec& spec, const PointSet& nodes) {
  return sample(spec, nodes.nodes());
}

std::string to_string(AmplitudeFamily family);
std::string to_string(SignConstraint sign);

}  // namespace fkp
