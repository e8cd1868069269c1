#pragma once

#include <cstdint>
#include <random>

namespace gbb {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed of stream `stream` under master seed `seed`. Replicate r of any
// experiment draws from derive_seed(seed, r), so it can be regenerated in
// isolation and is independent of how replicates are spread over threads.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

inline Engine make_engine(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32)};
  return Engine(seq);
}

inline Engine make_engine(std::uint64_t seed, std::uint64_t stream) {
  return make_engine(derive_seed(seed, stream));
}

}  // namespace gbb
