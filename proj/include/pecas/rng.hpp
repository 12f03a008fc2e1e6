#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>

namespace pecas {

/// SplitMix64. All randomness in the project comes from this generator so a
/// given seed reproduces bit-for-bit on any platform:
///
///   state += 0x9E3779B97F4A7C15
///   z = state
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   return z ^ (z >> 31)
///
/// uniform()      = (next() >> 11) * 2^-53, in [0, 1)
/// below(n)       = high 64 bits of the 128-bit product next() * n, in [0, n)
__extension__ using u128 = unsigned __int128;

class Rng {
 public:
  explicit constexpr Rng(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  constexpr double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  constexpr double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  constexpr std::uint64_t below(std::uint64_t n) noexcept {
    return static_cast<std::uint64_t>((static_cast<u128>(next()) * n) >> 64);
  }

  /// Independent generator for a named sub-stream (e.g. shuffling vs. init).
  constexpr Rng fork(std::uint64_t stream) noexcept {
    return Rng(next() ^ (stream * 0xD1B54A32D192ED03ULL));
  }

 private:
  std::uint64_t state_;
};

/// Fisher-Yates, last index first: for i = n-1 .. 1, swap(i, below(i+1)).
template <class T>
void shuffle(std::span<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace pecas
