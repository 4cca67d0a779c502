#pragma once

#include <cmath>
#include <cstdint>

namespace qshed {

// SplitMix64 (Steele, Lea, Flood 2014). Chosen as the project-wide seeded
// generator because its output is defined purely by 64-bit integer
// arithmetic: sender and receiver regenerate identical dither streams on any
// platform. The stream layout is part of the wire contract, see PROTOCOL.md.
class SplitMix64 {
public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1), 53 significant bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform double in (-0.5, 0.5].
  double next_centered() { return 0.5 - next_unit(); }

  // Exponential with unit mean (inverse CDF on the open unit interval).
  double next_exponential() {
    double u = next_unit();
    // log(0) guard; u == 0 has probability 2^-53 but the stream is long-lived.
    if (u <= 0.0) u = 0x1.0p-53;
    return -std::log(u);
  }

private:
  std::uint64_t state_;
};

// Deterministic seed derivation: one SplitMix64 scramble per mixed-in word.
// Used to split a master seed into per-eigenvector, per-device, per-round
// streams without correlation between them.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t word) {
  SplitMix64 g(seed ^ (word + 0x632be59bd9b4e019ULL));
  return g.next_u64();
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return mix_seed(mix_seed(seed, a), b);
}

}  // namespace qshed
