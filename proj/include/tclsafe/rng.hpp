#pragma once

#include <cstdint>
#include <limits>

namespace tclsafe {

/// Stream domains keep independent consumers of one scenario seed apart.
enum class StreamDomain : std::uint64_t {
  population_sampling = 1,
  device_switching = 2,
  realized_loads = 3,
  utility_probe = 4,
  synthetic_bernoulli = 5,
  safety_curve = 6,
  feeder_generator = 7,
  reference_signal = 8,
  nominal_loads = 9,
};

/// SplitMix64 finalizer; a bijective avalanche mix of one 64-bit word.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Hash a key tuple into a stream state. Distinct tuples give
/// statistically unrelated streams.
constexpr std::uint64_t derive_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                                   std::uint64_t c = 0) noexcept {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ a);
  h = mix64(h ^ b);
  h = mix64(h ^ c);
  return h;
}

/// Counter-based SplitMix64 engine. Construction is a single word copy, so a
/// fresh stream per (seed, probe, sample) is affordable inside Monte-Carlo
/// loops; results therefore never depend on how samples are split among
/// worker threads. Satisfies UniformRandomBitGenerator.
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit constexpr Stream(std::uint64_t state) noexcept : state_(state) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double on [0, 1) with 53 random bits.
  constexpr double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

inline Stream make_stream(std::uint64_t seed, StreamDomain domain, std::uint64_t a = 0,
                          std::uint64_t b = 0) noexcept {
  return Stream(derive_key(seed, static_cast<std::uint64_t>(domain), a, b));
}

}  // namespace tclsafe
