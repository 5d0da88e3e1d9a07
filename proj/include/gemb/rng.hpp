#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace gemb {

// Stream identifiers. Each consumer of randomness draws from its own stream so
// that, e.g., changing the number of subsamples never perturbs the graph draw.
enum class Stream : std::uint64_t {
  latents = 1,
  edges = 2,
  subsample = 3,
  unigram = 4,
  inclusion = 5,
  init = 6,
  training = 7,
  split = 8,
  random_features = 9,
};

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a,
                                    std::uint64_t b = 0) noexcept {
  std::uint64_t h = mix64(seed + 0x9e3779b97f4a7c15ULL);
  h = mix64(h ^ (a + 0x632be59bd9b4e019ULL));
  return mix64(h ^ (b + 0x85157af5a7d4c4b1ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, Stream s,
                                    std::uint64_t b = 0) noexcept {
  return derive_seed(seed, static_cast<std::uint64_t>(s), b);
}

/// Counter-based generator: the i-th output is a pure function of (key, i).
///
/// Satisfies UniformRandomBitGenerator, but the helpers below should be
/// preferred over <random> distributions, whose output differs between
/// standard library implementations.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t key) noexcept : key_(mix64(key)) {}
  Rng(std::uint64_t seed, Stream s, std::uint64_t index = 0) noexcept
      : Rng(derive_seed(seed, s, index)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
  }

  /// Uniform on [0, 1).
  double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer on [0, n). Lemire's multiply-shift with rejection.
  std::uint64_t below(std::uint64_t n) noexcept {
    if (n <= 1) return 0;
    unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<unsigned __int128>((*this)()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  /// Standard normal via Box-Muller (one output per call).
  double normal() noexcept {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace gemb
