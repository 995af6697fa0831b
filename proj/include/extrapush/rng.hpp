#pragma once

#include <cstdint>
#include <random>

namespace extrapush {

/// Seedable generator with platform-independent output. std::mt19937_64 is
/// fully specified by the standard; the <random> distributions are not, so the
/// conversions to reals are done here with plain arithmetic.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Zero-mean, unit-variance uniform draw on [-sqrt(3), sqrt(3)).
  double unit_variance() { return uniform(-kSqrt3, kSqrt3); }
  std::uint64_t next() { return engine_(); }
  /// Uniform integer in [0, bound); bound > 0.
  std::uint64_t below(std::uint64_t bound) { return next() % bound; }

 private:
  static constexpr double kSqrt3 = 1.7320508075688772;
  std::mt19937_64 engine_;
};

}  // namespace extrapush
