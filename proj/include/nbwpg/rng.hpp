#pragma once

#include <cstdint>

namespace nbwpg {

// splitmix64 step; used to expand seeds into xoshiro state.
inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// xoshiro256++ with splitmix64 seeding. Small, fast, and easy to fork into
// independent substreams keyed by (seed, index), which keeps parallel
// sweeps reproducible regardless of scheduling.
class Xoshiro256pp {
 public:
  explicit Xoshiro256pp(std::uint64_t seed = 0) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& word : s_) word = splitmix64(x);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

 private:
  static std::uint64_t rotl(std::uint64_t v, int k) {
    return (v << k) | (v >> (64 - k));
  }
  std::uint64_t s_[4];
};

// Seed for the index-th unit of work under a base seed; distinct indices
// land in statistically independent streams.
inline std::uint64_t fork_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t x = seed ^ (0xd1342543de82ef95ULL * (index + 1));
  std::uint64_t mixed = splitmix64(x);
  x ^= mixed;
  return splitmix64(x);
}

// Independent generator for the index-th unit of work under a base seed.
inline Xoshiro256pp substream(std::uint64_t seed, std::uint64_t index) {
  return Xoshiro256pp(fork_seed(seed, index));
}

}  // namespace nbwpg
