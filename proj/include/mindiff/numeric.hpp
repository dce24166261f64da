#pragma once

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace mindiff {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Fixed-order Gauss-Legendre rule on [lo, hi].
template <typename F>
double gauss_integrate(F&& f, double lo, double hi) {
  if (!(hi > lo)) return 0.0;
  return boost::math::quadrature::gauss<double, 10>::integrate(f, lo, hi);
}

/// |a - b| <= rel * max(|a|, |b|), with an absolute floor for values near zero.
inline bool nearly_equal(double a, double b, double rel, double abs_floor = 0.0) {
  return std::abs(a - b) <= std::max(rel * std::max(std::abs(a), std::abs(b)), abs_floor);
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seeded stream. Path streams are derived deterministically from (seed, index)
/// so results do not depend on thread scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}
  Rng(std::uint64_t seed, std::uint64_t stream)
      : engine_(splitmix64(splitmix64(seed) ^ splitmix64(~stream))) {}

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Uniform on (0, 1].
  double uniform_pos() { return 1.0 - uniform(); }
  double exponential(double rate) { return -std::log(uniform_pos()) / rate; }
  /// Gamma(shape, 1).
  double gamma(double shape) { return std::gamma_distribution<double>(shape)(engine_); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace mindiff
