#pragma once

#include <cstdint>
#include <random>

namespace ddcbf {

/// Deterministic uniform sampling on top of std::mt19937_64.
///
/// The engine is fully specified by the standard; the [0,1) mapping below
/// uses the top 53 bits directly, so streams are reproducible across
/// platforms (std::uniform_real_distribution makes no such promise).
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1).
  double next_unit() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  /// Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(engine_()) * n) >> 64);
  }

private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; used to derive independent per-stream seeds from
/// (base seed, stream index) without correlated low bits.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace ddcbf
