#pragma once

// Platform-independent random numbers: PCG64 (XSL-RR 128/64) seeded through
// SplitMix64, normals by the Marsaglia polar method. Standard-library
// distributions are avoided because their output is implementation-defined.

#include <cmath>
#include <cstdint>

#include <Eigen/Dense>

namespace kslyap {

inline std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Order-dependent hash of a few 64-bit words.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
  std::uint64_t s = a;
  std::uint64_t h = splitmix64(s);
  s = h ^ b;
  h = splitmix64(s);
  s = h ^ c;
  return splitmix64(s);
}

class Pcg64 {
 public:
  using result_type = std::uint64_t;

  explicit Pcg64(std::uint64_t seed) {
    std::uint64_t sm = seed;
    const unsigned __int128 init_state =
        (static_cast<unsigned __int128>(splitmix64(sm)) << 64) | splitmix64(sm);
    const unsigned __int128 init_seq =
        (static_cast<unsigned __int128>(splitmix64(sm)) << 64) | splitmix64(sm);
    inc_ = (init_seq << 1) | 1u;
    state_ = 0;
    step();
    state_ += init_state;
    step();
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() {
    step();
    const auto hi = static_cast<std::uint64_t>(state_ >> 64);
    const auto lo = static_cast<std::uint64_t>(state_);
    const unsigned rot = static_cast<unsigned>(state_ >> 122);
    const std::uint64_t x = hi ^ lo;
    return (x >> rot) | (x << ((64u - rot) & 63u));
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  void step() {
    constexpr unsigned __int128 kMult =
        (static_cast<unsigned __int128>(0x2360ED051FC65DA4ULL) << 64) | 0x4385DF649FCCF645ULL;
    state_ = state_ * kMult + inc_;
  }

  unsigned __int128 state_;
  unsigned __int128 inc_;
};

class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : rng_(seed) {}

  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double x, y, s;
    do {
      x = 2 * rng_.uniform() - 1;
      y = 2 * rng_.uniform() - 1;
      s = x * x + y * y;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = y * f;
    has_spare_ = true;
    return x * f;
  }

 private:
  Pcg64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// n i.i.d. standard normal components.
inline Eigen::VectorXd sample_normal_vector(std::size_t n, std::uint64_t seed) {
  NormalSampler gen(seed);
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = gen();
  return v;
}

}  // namespace kslyap
