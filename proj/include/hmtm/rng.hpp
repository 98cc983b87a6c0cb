#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace hmtm {

// Reproducible random stream.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the C++
// standard. The variate transforms below are written out explicitly instead of
// using <random> distributions, whose algorithms differ between standard
// library implementations. Together they give identical streams on every
// platform for the same seed.
class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "mt19937_64/polar/marsaglia-tsang v1";

  explicit Rng(std::uint64_t seed);

  // Derive an independent stream, e.g. one per chain or per candidate model.
  static Rng stream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform();
  // Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }

  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Gamma with shape and rate (mean shape / rate).
  double gamma(double shape, double rate = 1.0);
  // Inverse gamma with shape a and scale b (density proportional to x^{-a-1} e^{-b/x}).
  double inv_gamma(double shape, double scale) { return scale / gamma(shape, 1.0); }
  double beta(double a, double b);

  // Index drawn with probability proportional to weights (need not be normalized).
  std::size_t categorical(std::span<const double> weights);

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace hmtm
