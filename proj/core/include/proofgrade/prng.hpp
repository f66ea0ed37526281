#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>

namespace proofgrade {

/// SplitMix64 (Steele, Lea & Flood). Used to expand a single 64-bit seed into
/// generator state and as a general-purpose bit mixer.
///   state += 0x9E3779B97F4A7C15
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   return z ^ (z >> 31)
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}
  std::uint64_t next() noexcept;

 private:
  std::uint64_t state_;
};

/// Finaliser of SplitMix64 applied to a single value (no state advance).
std::uint64_t mix64(std::uint64_t value) noexcept;

/// xoshiro256** 1.0 (Blackman & Vigna), seeded by four SplitMix64 outputs.
/// Every random decision in the library (dataset splits, per-epoch shuffles,
/// the Random feedback strategy) goes through this generator so results are
/// reproducible bit-for-bit on any platform and in any language that
/// implements the same two algorithms.
class PortableRng {
 public:
  explicit PortableRng(std::uint64_t seed) noexcept;

  std::uint64_t next() noexcept;

  /// Uniform integer in [0, bound). Rejection sampling: draws r until
  /// r >= (2^64 - bound) mod bound, then returns r mod bound.
  std::uint64_t bounded(std::uint64_t bound) noexcept;

  /// Uniform double in [0, 1): (next() >> 11) * 2^-53.
  double uniform01() noexcept;

  /// Standard normal via Box-Muller on two uniform01 draws (cosine branch).
  double normal() noexcept;

 private:
  std::array<std::uint64_t, 4> s_{};
};

/// Fisher-Yates: for i = n-1 down to 1, swap(items[i], items[bounded(i+1)]).
template <typename T>
void shuffle(std::span<T> items, PortableRng& rng) noexcept {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.bounded(i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

/// 64-bit FNV-1a over the bytes of `data`, continuing from `basis`.
std::uint64_t fnv1a64(std::string_view data,
                      std::uint64_t basis = kFnvOffsetBasis) noexcept;

}  // namespace proofgrade
