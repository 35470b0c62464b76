#pragma once

#include <cmath>
#include <numbers>

namespace semcom {

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Probability that a Gaussian N(mean, scale^2) falls in [value - 1/2, value + 1/2).
// Uses the tail nearer to the interval to avoid cancellation far from the mean.
inline double discretized_gaussian_mass(double value, double mean, double scale) {
  const double upper = (value - mean + 0.5) / scale;
  const double lower = (value - mean - 0.5) / scale;
  if (lower > 0.0) {
    return 0.5 * (std::erfc(lower / std::numbers::sqrt2) - std::erfc(upper / std::numbers::sqrt2));
  }
  return normal_cdf(upper) - normal_cdf(lower);
}

// Smallest per-coordinate probability used in code lengths (2^-64).
inline constexpr double kMinCodeProbability = 0x1.0p-64;
inline constexpr double kMinEntropyScale = 1e-6;

}  // namespace semcom
