#pragma once

// Counter-based random numbers: Philox4x32-10 (Salmon et al., SC'11) plus the
// splitmix64 finalizer used for seed mixing. Everything here is a pure
// function of its inputs, so a draw can be addressed directly by a key and a
// counter without any sequential generator state.

#include <array>
#include <cstdint>
#include <limits>

namespace treepoly {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

namespace detail {

inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

constexpr void philox_round(PhiloxCounter& ctr, const PhiloxKey& key) {
  const std::uint64_t p0 = std::uint64_t{kPhiloxM0} * ctr[0];
  const std::uint64_t p1 = std::uint64_t{kPhiloxM1} * ctr[2];
  const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const auto lo0 = static_cast<std::uint32_t>(p0);
  const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const auto lo1 = static_cast<std::uint32_t>(p1);
  ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

}  // namespace detail

/// Philox4x32 with 10 rounds.
constexpr PhiloxCounter philox4x32(PhiloxCounter ctr, PhiloxKey key) {
  for (int round = 0; round < 10; ++round) {
    detail::philox_round(ctr, key);
    key[0] += detail::kPhiloxW0;
    key[1] += detail::kPhiloxW1;
  }
  return ctr;
}

/// splitmix64 output function; a bijection on 64-bit words.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Seed of replicate `index` derived from `base_seed`. Distinct indices map
/// to distinct seeds because splitmix64 is bijective.
constexpr std::uint64_t mix_seed(std::uint64_t base_seed, std::uint64_t index) {
  return splitmix64(base_seed + 0x9E3779B97F4A7C15ull * index);
}

constexpr PhiloxKey key_from_seed(std::uint64_t seed) {
  return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

/// Two 32-bit words -> double in [0, 1) with 53 random bits.
constexpr double to_unit_closed_open(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 11;
  return static_cast<double>(bits) * 0x1.0p-53;
}

/// Two 32-bit words -> double in (0, 1]; safe as a logarithm argument.
constexpr double to_unit_open_closed(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 11;
  return static_cast<double>(bits + 1) * 0x1.0p-53;
}

/// Sequential stream over Philox blocks, usable as a UniformRandomBitGenerator.
/// Stream `stream_id` under `seed` never overlaps another stream id.
class CounterStream {
 public:
  using result_type = std::uint32_t;

  CounterStream(std::uint64_t seed, std::uint64_t stream_id)
      : key_(key_from_seed(seed)), stream_id_(stream_id) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (used_ == 4) refill();
    return block_[used_++];
  }

  /// Uniform double in [0, 1).
  double uniform() {
    const std::uint32_t hi = (*this)();
    const std::uint32_t lo = (*this)();
    return to_unit_closed_open(hi, lo);
  }

 private:
  void refill() {
    block_ = philox4x32({static_cast<std::uint32_t>(block_index_),
                         static_cast<std::uint32_t>(block_index_ >> 32),
                         static_cast<std::uint32_t>(stream_id_),
                         static_cast<std::uint32_t>(stream_id_ >> 32)},
                        key_);
    ++block_index_;
    used_ = 0;
  }

  PhiloxKey key_;
  std::uint64_t stream_id_;
  std::uint64_t block_index_ = 0;
  PhiloxCounter block_{};
  int used_ = 4;
};

}  // namespace treepoly
