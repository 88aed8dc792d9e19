#pragma once

#include <cstdint>
#include <random>

namespace cage {

/// Deterministic random source. All draws are built on the standardized
/// mt19937 engine rather than the std distributions, whose algorithms are
/// implementation-defined; this keeps seeded runs identical across
/// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(static_cast<std::uint32_t>(mix(seed))) {}

  std::uint32_t next_u32() { return gen_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    std::uint64_t hi = next_u32() >> 6;   // 26 bits
    std::uint64_t lo = next_u32() >> 5;   // 27 bits
    return static_cast<double>((hi << 27) | lo) * (1.0 / 9007199254740992.0);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi], both inclusive, bias-free via rejection.
  int uniform_int(int lo, int hi) {
    auto range = static_cast<std::uint32_t>(hi - lo) + 1u;
    if (range == 0) return lo + static_cast<int>(next_u32());  // full 32-bit span
    std::uint32_t limit = UINT32_MAX - UINT32_MAX % range;
    std::uint32_t draw;
    do {
      draw = next_u32();
    } while (draw >= limit);
    return lo + static_cast<int>(draw % range);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Independent child stream; (seed, stream) pairs map to distinct seeds.
  Rng derive(std::uint64_t stream) const { return Rng(mix(seed_ + 0x9e3779b97f4a7c15ull * (stream + 1))); }

  std::uint64_t seed() const { return seed_; }

 private:
  // splitmix64 finalizer
  static std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  std::uint64_t seed_;
  std::mt19937 gen_;
};

}  // namespace cage
