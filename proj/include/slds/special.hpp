#pragma once

#include <cmath>
#include <limits>
#include <numbers>

namespace slds {

/// log(erfc(z)), accurate far into the right tail where erfc underflows.
inline double log_erfc(double z) {
  if (z < 20.0) return std::log(std::erfc(z));
  // Asymptotic expansion: erfc(z) ~ exp(-z^2)/(z sqrt(pi)) * (1 - 1/(2z^2) + 3/(4z^4) - 15/(8z^6)).
  const double z2 = z * z;
  const double series = 1.0 - 1.0 / (2.0 * z2) + 3.0 / (4.0 * z2 * z2) - 15.0 / (8.0 * z2 * z2 * z2);
  return -z2 - std::log(z * std::sqrt(std::numbers::pi)) + std::log(series);
}

/// Standard normal CDF.
inline double normal_cdf(double t) { return 0.5 * std::erfc(-t / std::numbers::sqrt2); }

/// log P(Z > t) for Z ~ N(0, 1).
inline double log_normal_upper_tail(double t) {
  return std::log(0.5) + log_erfc(t / std::numbers::sqrt2);
}

/// log P(a <= Z <= b) for Z ~ N(0, 1), stable when [a, b] sits deep in a tail.
inline double log_normal_interval(double a, double b) {
  if (!(a < b)) return -std::numeric_limits<double>::infinity();
  if (a >= 0.0) {
    // P(Z > a) - P(Z > b)
    const double la = log_normal_upper_tail(a);
    const double lb = std::isinf(b) ? -std::numeric_limits<double>::infinity()
                                    : log_normal_upper_tail(b);
    return la + std::log1p(-std::exp(lb - la));
  }
  if (b <= 0.0) return log_normal_interval(-b, -a);
  const double upper = std::isinf(b) ? 0.0 : 0.5 * std::erfc(b / std::numbers::sqrt2);
  const double lower = std::isinf(a) ? 0.0 : 0.5 * std::erfc(-a / std::numbers::sqrt2);
  return std::log1p(-(upper + lower));
}

/// log of the Lebesgue volume of the n-ball of the given radius.
inline double log_ball_volume(long n, double radius) {
  const double dn = static_cast<double>(n);
  return 0.5 * dn * std::log(std::numbers::pi) + dn * std::log(radius) - std::lgamma(0.5 * dn + 1.0);
}

}  // namespace slds
