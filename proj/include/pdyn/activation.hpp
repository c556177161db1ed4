#pragma once

#include <cmath>
#include <numbers>

namespace pdyn {

// Hidden-unit nonlinearity used throughout: g(x) = erf(x / sqrt(2)).
// Equals the CDF-style sigmoid 2*Phi(x) - 1; odd, saturating at +-1.
inline double activation(double x) {
  return std::erf(x / std::numbers::sqrt2);
}

// g'(x) = sqrt(2/pi) * exp(-x^2 / 2)
inline double activation_prime(double x) {
  constexpr double scale = 0.7978845608028653558798921198687637369517;  // sqrt(2/pi)
  return scale * std::exp(-0.5 * x * x);
}

}  // namespace pdyn
