#ifndef SRN_RNG_HPP_
#define SRN_RNG_HPP_

#include <cstdint>

namespace srn {

/// SplitMix64 step. Used to derive independent per-sample / per-epoch seeds
/// from (master seed, index) so parallel generation stays deterministic.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x51ed2701ULL));
}

}  // namespace srn

#endif  // SRN_RNG_HPP_
