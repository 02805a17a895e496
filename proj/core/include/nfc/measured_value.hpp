#pragma once

#include <initializer_list>
#include <span>
#include <string>
#include <utility>

namespace nfc {

// How first-order uncertainties combine. Linear is the worst-case sum of
// |partial| * sigma terms; quadrature is the root-sum-square.
enum class Propagation { linear, quadrature };

Propagation parse_propagation(const std::string& text);
std::string to_string(Propagation mode);

/// A number with a symmetric standard uncertainty.
struct MeasuredValue {
  double value = 0.0;
  double sigma = 0.0;
  std::string label;

  MeasuredValue() = default;
  MeasuredValue(double v, double s = 0.0, std::string l = {});

  /// sigma / |value|; zero when value is zero and sigma is zero.
  double relative() const;
};

/// One factor of a monomial: value^exponent.
struct Factor {
  const MeasuredValue& quantity;
  double exponent = 1.0;
};

/// coefficient * prod(x_i^e_i) with uncertainty from the partial derivatives,
/// all inputs treated as independent.
MeasuredValue monomial(double coefficient, std::span<const Factor> factors, Propagation mode);
MeasuredValue monomial(double coefficient, std::initializer_list<Factor> factors,
                       Propagation mode);

}  // namespace nfc
