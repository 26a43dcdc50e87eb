// Deterministic random streams.
//
// Everything sampled in this library comes from a SplitMix64 stream so that
// datasets, initial weights and probe vectors reproduce run-to-run from a
// single integer seed. std::random distributions are avoided on purpose:
// their output is implementation-defined.
#pragma once

#include <cmath>
#include <cstdint>

namespace tavlab {

constexpr std::uint64_t kSeedGolden = 0x9E3779B97F4A7C15ull;

// Derives a disjoint sub-stream seed. stream 0 maps to the base seed itself.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
  return base + stream * kSeedGolden;
}

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += kSeedGolden);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in (0, 1]; safe as a log() argument.
  double next_unit_open() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal deviate via Box-Muller (pairs cached).
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = next_unit_open();
    const double u2 = next_unit();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 6.283185307179586476925286766559 * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace tavlab
