#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace tcinn {

// Deterministic RNG with a fixed algorithm so that seeded runs are
// bit-reproducible across platforms and standard-library versions
// (std::mt19937's distributions are not pinned by the standard).
//
// Core generator: xoshiro256**. Substreams are derived by running splitmix64
// over (seed, tag), which gives well-separated state for independent uses
// (model init, shuffling, per-pair phantom generation).

inline uint64_t splitmix64(uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
public:
  Rng() : Rng(0, 0) {}

  Rng(uint64_t seed, uint64_t stream_tag) {
    uint64_t sm = seed;
    (void)splitmix64(sm);
    sm ^= 0xa0761d6478bd642fULL * (stream_tag + 1);
    for (auto& w : s_) w = splitmix64(sm);
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;  // all-zero state is invalid
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0,1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be >= 1. Rejection-free modulo is fine
  // here: n is always tiny compared to 2^64 so the bias is far below any
  // statistical behavior the engine depends on, and determinism is what counts.
  uint64_t uniform_index(uint64_t n) { return next_u64() % n; }

  // Standard normal via Box-Muller. One fresh pair of uniforms per call; no
  // cached second value, so the draw sequence is a pure function of call count.
  double normal() {
    double u1 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;  // guard log(0)
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Fisher-Yates with our own index draws, so shuffles are reproducible.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::array<uint64_t, 4> state() const { return s_; }
  void set_state(const std::array<uint64_t, 4>& s) { s_ = s; }

private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::array<uint64_t, 4> s_{};
};

// Fixed stream tags. Keeping them in one place avoids accidental collisions
// between independent consumers of the same user seed.
namespace stream {
constexpr uint64_t model_init = 0;
constexpr uint64_t shuffle = 1;
constexpr uint64_t phantom_base = 1000;  // pair i uses phantom_base + i
}  // namespace stream

}  // namespace tcinn
