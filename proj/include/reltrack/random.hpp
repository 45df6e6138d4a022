#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace reltrack {

/// Deterministic random stream for simulation runs.
///
/// Uses std::mt19937_64 (output sequence fixed by the standard) and derives
/// uniforms and normals with explicit transforms instead of the library
/// distributions, so a seed reproduces the same draw sequence on every
/// platform. A run owns exactly one stream; streams are never shared
/// between workers.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : gen_(seed) {}

  /// Uniform in [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; the second draw of each pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Stateless standard-normal draw addressed by (seed, index).
///
/// Used for per-step noise profiles that must be random-access (the same
/// index always yields the same value, independent of evaluation order).
inline double indexed_normal(std::uint64_t seed, std::uint64_t index) {
  const std::uint64_t a = detail::splitmix64(seed ^ detail::splitmix64(index));
  const std::uint64_t b = detail::splitmix64(a);
  // u1 in (0, 1] so the log is finite.
  const double u1 = (static_cast<double>(a >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace reltrack
