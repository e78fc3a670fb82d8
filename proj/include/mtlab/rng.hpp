#pragma once

#include <cstdint>

namespace mtlab {

// Counter-based generator: the stream is a pure function of
// (seed, stream id, position), so ensemble members can be drawn in any
// order and still reproduce bit-identically.
class CounterRng {
public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
      : key_(mix(seed ^ mix(stream + 0x9e3779b97f4a7c15ULL))) {}

  std::uint64_t next_u64() noexcept { return mix(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  std::uint64_t position() const noexcept { return counter_; }

  static std::uint64_t mix(std::uint64_t z) noexcept {
    // splitmix64 finalizer
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace mtlab
