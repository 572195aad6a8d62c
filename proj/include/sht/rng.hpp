#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace sht {

/// Finalizer of SplitMix64 (Steele, Lea and Flood). A bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Independent random streams are derived from one user seed by tagging each
/// consumer. Values are part of the reproducibility contract: changing them
/// changes every recorded trace.
enum class StreamTag : std::uint64_t {
  component = 1,
  snapshot = 2,
  block = 3,
  delay = 4,
  worker = 5,
  design = 6,
  truth = 7,
  noise = 8,
  labels = 9,
  corruption = 10,
  measurement = 11,
  trial = 12,
  permutation = 13,
};

/// SplitMix64: a counter-based generator. Output j of a stream with key s is
/// mix64(s + (j + 1) * 0x9E3779B97F4A7C15). Satisfies
/// UniformRandomBitGenerator so it composes with <algorithm>.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit constexpr SplitMix64(std::uint64_t state) noexcept : state_(state) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept {
    state_ += kGamma;
    return mix64(state_);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on [0, bound). Lemire's multiply-shift with rejection, so
  /// the result is exactly uniform.
  std::uint64_t below(std::uint64_t bound) noexcept {
    unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>((*this)()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Standard normal via Box-Muller (cosine branch only; two draws per call).
  double normal() noexcept {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
  std::uint64_t state_;
};

/// Stream for (seed, tag, index). Distinct triples give unrelated streams.
constexpr SplitMix64 make_stream(std::uint64_t seed, StreamTag tag, std::uint64_t index = 0) noexcept {
  const std::uint64_t key =
      mix64(mix64(seed ^ (static_cast<std::uint64_t>(tag) * 0xD1B54A32D192ED03ULL)) +
            index * 0x9E3779B97F4A7C15ULL);
  return SplitMix64(key);
}

}  // namespace sht
