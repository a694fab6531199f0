#pragma once

#include <cmath>
#include <cstdint>

namespace impact {

// SplitMix64: a tiny counter-based generator (Weyl sequence + mix13
// finalizer). Cheap to seed, no warm-up, and any two distinct seeds give
// decorrelated streams, which is what the per-path scheme below relies on.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform on (0, 1]: 53-bit resolution, never 0, so log() is always safe.
  double next_unit() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

// Stream-derivation scheme (part of the reproducibility contract, documented
// in the README): the stream for logical index i under base seed s is
// SplitMix64 seeded with mix13(s + (i + 1) * GAMMA), GAMMA being the SplitMix
// Weyl constant. Streams depend only on (s, i), never on evaluation order or
// thread count.
inline std::uint64_t stream_seed(std::uint64_t base_seed, std::uint64_t stream_index) {
  std::uint64_t z = base_seed + (stream_index + 1) * 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Standard normal variates via Box-Muller; the sine twin is cached so one
// uniform pair yields two draws.
class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : eng_(seed) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    constexpr double kTwoPi = 6.283185307179586;
    const double u1 = eng_.next_unit();
    const double u2 = eng_.next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(kTwoPi * u2);
    have_spare_ = true;
    return r * std::cos(kTwoPi * u2);
  }

 private:
  SplitMix64 eng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace impact
