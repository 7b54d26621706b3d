#pragma once

#include <cmath>

namespace hmprate {

inline constexpr double kTwoPi = 6.28318530717958647692528676655900577;

/// x ln x with the 0 ln 0 = 0 convention.
inline double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

/// x ln y with the 0 ln 0 = 0 convention (x = 0 dominates).
inline double xlogy(double x, double y) { return x != 0.0 ? x * std::log(y) : 0.0; }

/// Binary entropy in nats.
inline double binary_entropy(double p) { return -xlogx(p) - xlogx(1.0 - p); }

inline double sq(double x) { return x * x; }

/// Standard normal density.
inline double std_normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(kTwoPi); }

/// Differential entropy of a unit-variance Gaussian, 0.5 ln(2*pi*e).
inline double gaussian_entropy_unit_variance() { return 0.5 * std::log(kTwoPi) + 0.5; }

}  // namespace hmprate
