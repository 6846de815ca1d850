#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>

namespace anneal {

/// SplitMix64 finalizer; used for seeding and for deriving stream keys.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Purposes a run draws randomness for. Each gets its own family of streams
/// so that, e.g., recycling a stored trace never replays mutation noise.
enum class StreamTag : std::uint64_t {
  prior_init = 1,
  resample = 2,
  mutation = 3,
  uniformize = 4,
  auxiliary = 5,
};

/// xoshiro256** generator. Satisfies UniformRandomBitGenerator so it plugs
/// into <random> distributions.
///
/// Streams are derived by counter: stream(seed, tag, a, b) hashes the tuple
/// into a fresh state, so particle m at iteration t always sees the same
/// numbers regardless of evaluation order or thread assignment.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) noexcept { reseed(seed); }

  static Rng stream(std::uint64_t seed, StreamTag tag, std::uint64_t a = 0,
                    std::uint64_t b = 0) noexcept {
    std::uint64_t k = splitmix64(seed);
    k = splitmix64(k ^ static_cast<std::uint64_t>(tag));
    k = splitmix64(k ^ (a * 0xd1342543de82ef95ULL));
    k = splitmix64(k ^ (b * 0xaf251af3b0f025b5ULL));
    return Rng(k);
  }

  void reseed(std::uint64_t seed) noexcept {
    for (std::size_t i = 0; i < s_.size(); ++i) {
      s_[i] = splitmix64(seed + i * 0x9e3779b97f4a7c15ULL);
    }
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> s_{};
};

}  // namespace anneal
