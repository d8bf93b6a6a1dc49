#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace semplan {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kInfD = std::numeric_limits<double>::infinity();

/// Normalize an angle into (-pi, pi]. Values already in range are returned
/// unchanged, so the function is exactly idempotent.
inline double normalize_angle(double a) {
  if (a > -kPi && a <= kPi) return a;
  double r = std::remainder(a, 2.0 * kPi);  // exact IEEE remainder, r in [-pi, pi]
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

inline double sq(double x) { return x * x; }

/// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Deterministic RNG wrapper. All draws go through explicit helpers so that
/// streams are reproducible regardless of the standard library's distribution
/// implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t raw() { return eng_(); }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform index in [0, n). n must be positive.
  std::size_t index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("Rng::index: n must be positive");
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  /// Standard normal draw (Box-Muller, cached spare).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * kPi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * kPi * u2);
  }

  /// Draw an index according to an (unnormalized is not allowed) probability
  /// vector. Probabilities must sum to 1 within 1e-9.
  std::size_t categorical(const std::vector<double>& p) {
    double total = 0.0;
    for (double x : p) total += x;
    if (std::abs(total - 1.0) > 1e-9)
      throw std::invalid_argument("Rng::categorical: probabilities must sum to 1");
    const double u = uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      acc += p[i];
      if (u < acc) return i;
    }
    return p.size() - 1;
  }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

inline void hash_combine(std::size_t& seed, std::size_t v) {
  seed ^= v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2);
}

inline std::size_t hash_bits(double x) {
  std::uint64_t b;
  static_assert(sizeof(b) == sizeof(x));
  std::memcpy(&b, &x, sizeof(b));
  return std::hash<std::uint64_t>{}(b);
}

}  // namespace semplan
