#pragma once

#include <cmath>
#include <numbers>
#include <span>

// Log densities used by the marginal-likelihood ordinates and by tests.
namespace hmtm::dist {

inline double log_normal(double x, double mean, double var) {
  const double z = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * var) + z * z / var);
}

// Inverse gamma, shape a and scale b.
inline double log_inv_gamma(double x, double a, double b) {
  return a * std::log(b) - std::lgamma(a) - (a + 1.0) * std::log(x) - b / x;
}

// Gamma, shape a and rate b.
inline double log_gamma(double x, double a, double b) {
  return a * std::log(b) - std::lgamma(a) + (a - 1.0) * std::log(x) - b * x;
}

inline double log_beta(double x, double a, double b) {
  return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + (a - 1.0) * std::log(x) +
         (b - 1.0) * std::log1p(-x);
}

// log(mean(exp(values))), stabilized.
double log_mean_exp(std::span<const double> values);
double log_sum_exp(std::span<const double> values);

}  // namespace hmtm::dist
