#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace crowdsynth {

/// SplitMix64 finalizer; used to derive independent per-job seeds from ids.
constexpr std::uint64_t mix_seed(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Folds a base seed with a list of identifiers (cell indices, agent ids, ...)
/// so that the result does not depend on execution order.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> ids) {
  std::uint64_t s = mix_seed(base);
  for (auto id : ids) s = mix_seed(s ^ mix_seed(id + 0x632BE59BD9B4E019ULL));
  return s;
}

/// Thin wrapper over mt19937_64 with the few draws the library needs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) {
    // generate_canonical is not portable across standard libraries; build the
    // double from the top 53 bits instead.
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : engine_() % n; }

  bool coin() { return (engine_() >> 63) != 0; }

  double normal(double mean, double stddev) {
    // Box-Muller on our own uniforms keeps results identical across toolchains.
    double u1 = uniform(0.0, 1.0);
    while (u1 <= 0.0) u1 = uniform(0.0, 1.0);
    const double u2 = uniform(0.0, 1.0);
    return mean + stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace crowdsynth
