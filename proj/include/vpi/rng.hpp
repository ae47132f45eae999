#pragma once

#include <cstdint>

namespace vpi {

/// splitmix64 finalizer; maps (base seed, stream index) to independent seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return mix_seed(mix_seed(base) ^ mix_seed(index + 0x5851f42d4c957f2dULL));
}

/// xoshiro256** seeded through splitmix64. A new stream is created for every
/// trace, so seeding has to be cheap; mt19937_64 spends more time filling its
/// state than a dice run takes.
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  explicit Xoshiro256(std::uint64_t seed) {
    for (auto& w : s_) {
      w = mix_seed(seed);
      seed += 0x9e3779b97f4a7c15ULL;
    }
  }

  result_type operator()() {
    const std::uint64_t out = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return out;
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
};

/// Random stream owned by a single run or sampler.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; no cached second variate so the stream
  /// position depends only on the number of calls.
  double normal();

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  Xoshiro256 engine_;
};

}  // namespace vpi
