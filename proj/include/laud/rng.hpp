#pragma once

#include <cstdint>
#include <string_view>

namespace laud {

/// splitmix64: tiny deterministic PRNG with portable, compiler-independent
/// output. Used everywhere randomness must be reproducible bit-for-bit
/// (weight init, shuffles, crops, augmentation, synthetic test data).
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0,1) with 53 bits of mantissa.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  /// Uniform integer in [0, n).
  uint64_t next_below(uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

 private:
  uint64_t state_;
};

/// Derive an independent stream seed from a master seed and a role tag,
/// so e.g. weight init and data shuffling never share a stream.
uint64_t derive_seed(uint64_t master, std::string_view role);

}  // namespace laud
