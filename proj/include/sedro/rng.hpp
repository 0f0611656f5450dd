#pragma once

#include <cstdint>

namespace sedro {

/// Random streams. Each subsystem draws from its own stream so that adding
/// draws in one place never perturbs another.
enum class RngStream : std::uint64_t {
  Caregiver = 1,
  Eval = 2,
  Agent = 3,
};

/// Counter-based generator: every draw is a pure function of
/// (seed, tick, stream, index). There is no hidden sequential state.
struct CounterRng {
  std::uint64_t seed = 0;

  static constexpr std::uint64_t mix(std::uint64_t z) {
    // splitmix64 finalizer
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  constexpr std::uint64_t bits(std::uint64_t tick, RngStream stream,
                               std::uint64_t index = 0) const {
    std::uint64_t h = mix(seed);
    h = mix(h ^ tick);
    h = mix(h ^ static_cast<std::uint64_t>(stream));
    return mix(h ^ index);
  }

  /// Uniform in [0, 1) with 53 bits of resolution.
  constexpr double uniform(std::uint64_t tick, RngStream stream,
                           std::uint64_t index = 0) const {
    return static_cast<double>(bits(tick, stream, index) >> 11) * 0x1.0p-53;
  }

  constexpr double uniform(double lo, double hi, std::uint64_t tick, RngStream stream,
                           std::uint64_t index = 0) const {
    return lo + (hi - lo) * uniform(tick, stream, index);
  }
};

}  // namespace sedro
