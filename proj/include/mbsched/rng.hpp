#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string_view>

namespace mbsched {

// Deterministic RNG used everywhere randomness is needed.  All samplers are
// implemented on top of raw mt19937_64 output instead of std:: distributions,
// which are allowed to differ between standard libraries; traces produced with
// the same seed must be bit-identical on every platform we build on.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix(seed)) {}

  // Named substream: independent stream derived from (seed, name, index).
  Rng(std::uint64_t seed, std::string_view name, std::uint64_t index = 0)
      : engine_(mix(seed ^ fnv1a(name) ^ mix(index + 0x9e3779b97f4a7c15ull))) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0,1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double log_uniform(double lo, double hi) {
    return std::exp(uniform(std::log(lo), std::log(hi)));
  }

  // Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
    // rejection sampling to avoid modulo bias
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  // Index sampled from a probability vector (assumed to sum to ~1).
  std::size_t categorical(std::span<const double> probs) {
    const double u = uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return i;
    }
    return probs.size() - 1;  // mop up rounding in the final bin
  }

  // Knuth's product method; mean is split into chunks <= 30 so that
  // exp(-mean) stays well above underflow.
  std::uint64_t poisson(double mean) {
    if (mean < 0 || !std::isfinite(mean))
      throw std::invalid_argument("poisson: mean must be finite and >= 0");
    std::uint64_t total = 0;
    while (mean > 0) {
      const double chunk = mean > 30.0 ? 30.0 : mean;
      mean -= chunk;
      const double limit = std::exp(-chunk);
      double p = 1.0;
      std::uint64_t k = 0;
      do {
        ++k;
        p *= uniform();
      } while (p > limit);
      total += k - 1;
    }
    return total;
  }

  // Geometric on {0,1,2,...} with the given mean: success prob p = 1/(1+mean).
  std::uint64_t geometric_from_mean(double mean) {
    if (mean < 0 || !std::isfinite(mean))
      throw std::invalid_argument("geometric_from_mean: mean must be finite and >= 0");
    if (mean == 0) return 0;
    const double log_q = std::log1p(-1.0 / (1.0 + mean));  // log(1-p) < 0
    const double u = uniform();
    const double x = std::floor(std::log1p(-u) / log_q);
    if (x > 9e18) return 9000000000000000000ull;  // unreachable in practice
    return static_cast<std::uint64_t>(x);
  }

 private:
  static constexpr std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ull;
    }
    return h;
  }

  // splitmix64 finalizer; decorrelates nearby seeds before they reach the engine
  static constexpr std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  std::mt19937_64 engine_;
};

}  // namespace mbsched
