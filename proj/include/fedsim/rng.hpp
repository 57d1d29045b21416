#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "fedsim/error.hpp"

namespace fedsim {

// SplitMix64 finalizer, used to derive decorrelated stream seeds.
inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Named sub-streams of one experiment seed. Every consumer of randomness
// derives its own stream, so results never depend on the order in which
// components happen to draw.
enum class StreamTag : std::uint64_t {
  kInit = 1,         // parameter initialization
  kBlobs = 2,        // synthetic dataset generation
  kPartition = 3,    // shard assignment
  kSampling = 4,     // per-round client sampling
  kClient = 5,       // per-(round, client) local training
  kCentralized = 6,  // centralized baseline epoch shuffling
  kTestData = 7,     // held-out set generation in experiments
};

inline constexpr std::uint64_t derive_seed(std::uint64_t base, StreamTag tag,
                                           std::uint64_t a = 0,
                                           std::uint64_t b = 0) {
  std::uint64_t h = splitmix64(base ^ 0x6A09E667F3BCC909ULL);
  h = splitmix64(h ^ splitmix64(static_cast<std::uint64_t>(tag)));
  h = splitmix64(h ^ splitmix64(a ^ 0xBB67AE8584CAA73BULL));
  h = splitmix64(h ^ splitmix64(b ^ 0x3C6EF372FE94F82BULL));
  return h;
}

// Deterministic random source. std::mt19937_64 output is specified
// bit-for-bit by the standard; the distributions below are implemented here
// because the <random> distribution algorithms are implementation-defined
// and would break reproducibility across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double next_unit() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Unbiased uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) throw ConfigError("Rng::next_below: n must be positive");
    const std::uint64_t min = (0 - n) % n;  // 2^64 mod n
    std::uint64_t r = engine_();
    while (r < min) r = engine_();
    return r % n;
  }

  // Standard normal via Box-Muller; the second value of each pair is cached.
  double next_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - next_unit();  // (0, 1], keeps log finite
    const double u2 = next_unit();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  // Gamma(shape, 1) via Marsaglia-Tsang, with the alpha < 1 boost.
  double next_gamma(double shape) {
    if (!(shape > 0.0)) {
      throw ConfigError("Rng::next_gamma: shape must be positive");
    }
    if (shape < 1.0) {
      const double u = 1.0 - next_unit();
      return next_gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = 0.0;
      double v = 0.0;
      do {
        x = next_normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = 1.0 - next_unit();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  // Dirichlet(alpha) over k categories.
  std::vector<double> next_dirichlet(double alpha, std::size_t k) {
    std::vector<double> w(k);
    double sum = 0.0;
    for (auto& x : w) {
      x = next_gamma(alpha);
      sum += x;
    }
    if (sum > 0.0) {
      for (auto& x : w) x /= sum;
    } else {
      // all draws underflowed (tiny alpha); fall back to uniform
      for (auto& x : w) x = 1.0 / static_cast<double>(k);
    }
    return w;
  }

  // In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[next_below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace fedsim
