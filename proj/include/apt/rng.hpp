#pragma once

#include <cstdint>
#include <limits>

namespace apt {

/// Counter-based random stream.
///
/// Every (seed, iteration, slot) triple names an independent stream, so the
/// draws made for one chain level do not depend on the order in which levels
/// are processed or on how many workers process them. Internally this is a
/// SplitMix64 generator whose starting state is a hash of the key.
class StreamRng {
 public:
  using result_type = std::uint64_t;

  StreamRng(std::uint64_t seed, std::uint64_t iteration, std::uint64_t slot)
      : state_(mix(mix(mix(seed ^ 0x243F6A8885A308D3ULL) ^ iteration) ^
                   (slot * 0x9E3779B97F4A7C15ULL + 0x13198A2E03707344ULL))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

// Reserved stream slots. Chain levels use slots [0, L).
inline constexpr std::uint64_t kSwapSlot = 0xFFFF'0001ULL;
inline constexpr std::uint64_t kInitSlotBase = 0xFFFF'1000'0000ULL;

/// Seed for replication r derived from a base seed.
inline std::uint64_t replication_seed(std::uint64_t base, std::uint64_t r) {
  return StreamRng::mix(base + 0xD1B54A32D192ED03ULL * (r + 1));
}

}  // namespace apt
