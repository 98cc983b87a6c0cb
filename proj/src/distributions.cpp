#include "hmtm/distributions.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace hmtm::dist {

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double hi = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - hi);
  return hi + std::log(acc);
}

double log_mean_exp(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("log_mean_exp: empty input");
  return log_sum_exp(values) - std::log(static_cast<double>(values.size()));
}

}  // namespace hmtm::dist
