#pragma once

#include <cstdint>
#include <initializer_list>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

namespace icadyn {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for an independent stream, derived from a root seed and a path of
// stream indices (trial, chunk, ...). Streams with distinct paths do not
// share state, so trials can run on any thread in any order.
inline std::uint64_t derive_seed(std::uint64_t root,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = splitmix64(root);
  for (auto p : path) s = splitmix64(s ^ splitmix64(p + 0x632be59bd9b4e019ULL));
  return s;
}

// xoshiro256++ (Blackman & Vigna), seeded through splitmix64. Satisfies
// UniformRandomBitGenerator.
class Xoshiro256pp {
public:
  using result_type = std::uint64_t;

  explicit Xoshiro256pp(std::uint64_t seed) {
    for (auto& w : s_) w = seed = splitmix64(seed);
  }
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() {
    const result_type r = rotl(s_[0] + s_[3], 23) + s_[0];
    const result_type t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return r;
  }

private:
  static result_type rotl(result_type x, int k) { return (x << k) | (x >> (64 - k)); }
  result_type s_[4];
};

// Seeded generator with the two draws the simulators need. The normal draw
// is boost's ziggurat, which is bit-reproducible across standard libraries.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  Rng split(std::uint64_t stream) const {
    return Rng(derive_seed(seed_of_state(), {stream}));
  }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }

  Xoshiro256pp& engine() { return engine_; }

private:
  std::uint64_t seed_of_state() const {
    auto copy = engine_;
    return copy();
  }

  Xoshiro256pp engine_;
  boost::random::normal_distribution<double> normal_;
  boost::random::uniform_01<double> uniform_;
};

}  // namespace icadyn
