#include "laud/rng.hpp"

namespace laud {

uint64_t derive_seed(uint64_t master, std::string_view role) {
  // FNV-1a over the role tag, mixed with the master seed through splitmix.
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char ch : role) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  SplitMix64 mix(master ^ h);
  mix.next_u64();
  return mix.next_u64();
}

}  // namespace laud
