#pragma once

#include <cmath>
#include <numbers>

namespace refsel {

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double log_normal_pdf(double x) {
  return -0.5 * x * x - 0.5 * std::log(2.0 * std::numbers::pi);
}

inline double log_normal_density(double y, double mean, double sd) {
  const double z = (y - mean) / sd;
  return log_normal_pdf(z) - std::log(sd);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Upper tail 1 - Phi(x) without cancellation.
inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

/// log Phi(x), accurate far into the lower tail.
double log_normal_cdf(double x);

/// Mills ratio (1 - Phi(x)) / phi(x), stable for large positive x.
double mills_ratio(double x);

double normal_quantile(double p);

}  // namespace refsel
