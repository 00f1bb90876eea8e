#ifndef ETPR_RNG_HPP
#define ETPR_RNG_HPP

#include <cstdint>
#include <limits>

namespace etpr {

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Derives an independent 64-bit seed for sub-stream `index` of `seed`.
/// Used for per-replication and per-restart seeds.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return detail::mix64(detail::mix64(seed ^ 0x6A09E667F3BCC909ULL) + detail::mix64(index + detail::kGolden));
}

/// Counter-based 64-bit generator ("SplitMix64 counter" construction).
///
/// Draw number k (k = 0, 1, ...) of stream s under seed is
///   mix64(key + (k + 1) * 0x9E3779B97F4A7C15),   key = derive_seed(seed, s).
/// Output therefore depends only on (seed, stream, k): streams are split by
/// giving every parallel task its own stream index, and `discard` is O(1).
/// Satisfies UniformRandomBitGenerator, so it plugs into <random> distributions.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit constexpr CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : key_(derive_seed(seed, stream)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept {
    ++counter_;
    return detail::mix64(key_ + counter_ * detail::kGolden);
  }

  constexpr void discard(std::uint64_t n) noexcept { counter_ += n; }
  constexpr std::uint64_t counter() const noexcept { return counter_; }

  /// Uniform double in (0, 1), 53 random bits, never 0 or 1.
  constexpr double uniform() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace etpr

#endif  // ETPR_RNG_HPP
