#pragma once

#include <cstdint>
#include <random>

namespace driveid::numerics {

/// SplitMix64 finalizer; a strong 64-bit mixing function.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives an independent seed from a parent seed and a stream tag.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) noexcept {
  return mix64(seed ^ mix64(tag + 0x632be59bd9b4e019ULL));
}

/// Counter-based uniform in [0, 1): a pure function of (key, counter).
constexpr double counter_uniform(std::uint64_t key, std::uint64_t counter) noexcept {
  return static_cast<double>(mix64(key ^ mix64(counter)) >> 11) * 0x1.0p-53;
}

/// Seeded generator with platform-independent draws on top of mt19937_64.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);

  /// Standard normal via Box-Muller (one value per call, no caching).
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

/// Per-call dropout masks derived from a master seed.
///
/// Every dropout invocation takes the next call index; element i of that call
/// is dropped iff counter_uniform(stream key, i) < p.
class DropoutStream {
 public:
  explicit DropoutStream(std::uint64_t seed) : seed_(seed) {}

  /// Key for the next dropout call.
  std::uint64_t next_key() { return derive_seed(seed_, calls_++); }

  std::uint64_t calls() const noexcept { return calls_; }

 private:
  std::uint64_t seed_;
  std::uint64_t calls_ = 0;
};

}  // namespace driveid::numerics
