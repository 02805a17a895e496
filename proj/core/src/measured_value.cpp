#include "nfc/measured_value.hpp"

#include <cmath>
#include <vector>

#include "nfc/errors.hpp"

namespace nfc {

Propagation parse_propagation(const std::string& text) {
  if (text == "linear") return Propagation::linear;
  if (text == "quadrature") return Propagation::quadrature;
  throw DomainError("unknown propagation mode '" + text + "' (expected linear|quadrature)");
}

std::string to_string(Propagation mode) {
  return mode == Propagation::linear ? "linear" : "quadrature";
}

MeasuredValue::MeasuredValue(double v, double s, std::string l)
    : value(v), sigma(s), label(std::move(l)) {
  if (!(s >= 0.0)) throw DomainError("measured value '" + label + "' has negative sigma");
}

double MeasuredValue::relative() const {
  if (value == 0.0) {
    if (sigma == 0.0) return 0.0;
    throw DomainError("relative uncertainty of a zero value");
  }
  return sigma / std::abs(value);
}

MeasuredValue monomial(double coefficient, std::initializer_list<Factor> factors,
                       Propagation mode) {
  return monomial(coefficient, std::span<const Factor>(factors.begin(), factors.size()), mode);
}

MeasuredValue monomial(double coefficient, std::span<const Factor> factors, Propagation mode) {
  double value = coefficient;
  for (const Factor& f : factors) {
    if (f.quantity.value == 0.0 && f.exponent < 0.0) {
      throw DomainError("division by zero-valued quantity '" + f.quantity.label + "'");
    }
    value *= std::pow(f.quantity.value, f.exponent);
  }

  double accum = 0.0;
  for (const Factor& f : factors) {
    if (f.quantity.sigma == 0.0) continue;
    // d value / d x_i, written without dividing by x_i so x_i = 0 works for e_i >= 1.
    double partial = coefficient * f.exponent * std::pow(f.quantity.value, f.exponent - 1.0);
    for (const Factor& g : factors) {
      if (&g != &f) partial *= std::pow(g.quantity.value, g.exponent);
    }
    const double term = std::abs(partial) * f.quantity.sigma;
    accum += mode == Propagation::linear ? term : term * term;
  }
  const double sigma = mode == Propagation::linear ? accum : std::sqrt(accum);
  return MeasuredValue(value, sigma);
}

}  // namespace nfc
