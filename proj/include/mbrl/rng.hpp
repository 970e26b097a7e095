#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "mbrl/types.hpp"

namespace mbrl {

// xoshiro256** seeded through splitmix64. The whole generator state is four
// words, so every stream a run owns can be captured in a checkpoint and
// restored bit-exactly. Gaussians use non-caching Box-Muller for the same
// reason: no hidden spare sample.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& w : state_) w = splitmix64(x);
  }

  // Derives an independent stream from (seed, stream id).
  static Rng stream(std::uint64_t seed, std::uint64_t stream_id) {
    std::uint64_t x = seed;
    std::uint64_t mixed = splitmix64(x) ^ (0x9e3779b97f4a7c15ull * (stream_id + 1));
    return Rng(mixed);
  }

  std::uint64_t next_u64() {
    std::uint64_t& s0 = state_[0];
    std::uint64_t& s1 = state_[1];
    std::uint64_t& s2 = state_[2];
    std::uint64_t& s3 = state_[3];
    const std::uint64_t result = rotl(s1 * 5, 7) * 9;
    const std::uint64_t t = s1 << 17;
    s2 ^= s0;
    s3 ^= s1;
    s1 ^= s2;
    s0 ^= s3;
    s2 ^= t;
    s3 = rotl(s3, 45);
    return result;
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  int uniform_int(int n) {
    int k = static_cast<int>(uniform() * static_cast<double>(n));
    return k < n ? k : n - 1;
  }

  std::int64_t uniform_index(std::int64_t n) {
    auto k = static_cast<std::int64_t>(uniform() * static_cast<double>(n));
    return k < n ? k : n - 1;
  }

  // Standard normal via Box-Muller; consumes exactly two uniforms per draw.
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  Vec normal_vec(int n) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  Mat normal_mat(int rows, int cols) {
    Mat m(rows, cols);
    for (int c = 0; c < cols; ++c)
      for (int r = 0; r < rows; ++r) m(r, c) = normal();
    return m;
  }

  std::array<std::uint64_t, 4> state() const { return state_; }
  void set_state(const std::array<std::uint64_t, 4>& s) { state_ = s; }

 private:
  static std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  static std::uint64_t rotl(std::uint64_t v, int k) {
    return (v << k) | (v >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_{};
};

}  // namespace mbrl
