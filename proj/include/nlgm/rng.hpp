#pragma once

// Portable random streams.
//
// Generator: xoshiro256** (Blackman & Vigna), state seeded from four
// consecutive SplitMix64 outputs. A stream is identified by (seed, index):
//
//   stream_seed = mix64(seed ^ mix64(index + 0x9E3779B97F4A7C15))
//
// where mix64 is the SplitMix64 finalizer. Bootstrap replicate b uses stream
// (seed, b), so results do not depend on evaluation order or thread count.
//
// Variates are derived with fixed algorithms so other implementations can
// reproduce them:
//   uniform01       (next() >> 11) * 2^-53
//   uniform_index   Lemire multiply-shift with rejection
//   standard_normal Box-Muller, cosine branch only, u1 = 1 - uniform01()

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>

namespace nlgm {

std::uint64_t mix64(std::uint64_t z);

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();

 private:
  std::uint64_t state_;
};

class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed);
  // Independent substream keyed by a counter.
  static Rng stream(std::uint64_t seed, std::uint64_t index);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return next(); }

  std::uint64_t next();
  double uniform01();
  // Uniform on [0, n). n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n);
  double standard_normal();
  double normal(double mean, double sd) { return mean + sd * standard_normal(); }

  // Fisher-Yates, high index first.
  template <typename T>
  void shuffle(std::span<T> v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace nlgm
