#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace amcr {

// pcg32 (PCG-XSH-RR 64/32, O'Neill). The generator is pinned to this one
// algorithm so that a given (seed, stream) pair produces the same draw
// sequence on every platform and toolchain; nothing in the pipeline may use
// std:: distributions, whose output is implementation-defined.
//
// Distinct stream ids yield statistically independent sequences for the same
// seed, which is how the pipeline separates initialization, shuffling,
// dropout, augmentation, and synthesis draws (see rng_streams below).
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
      : state_(0u), inc_((stream << 1u) | 1u) {
    next_u32();
    state_ += seed;
    next_u32();
  }

  std::uint32_t next_u32() {
    const std::uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    const auto xorshifted =
        static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    const auto rot = static_cast<std::uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
  }

  std::uint64_t next_u64() {
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  // Uniform in [0, 1): 24 significant bits for float, 53 for double.
  float uniform_float() { return static_cast<float>(next_u32() >> 8) * 0x1.0p-24f; }
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n), n > 0, by rejection.
  std::uint32_t below(std::uint32_t n) {
    const std::uint32_t threshold = (0u - n) % n;
    for (;;) {
      const std::uint32_t r = next_u32();
      if (r >= threshold) return r % n;
    }
  }

  bool coin() { return (next_u32() >> 31) != 0u; }

  // Fisher-Yates; one below() draw per element, back to front.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = below(static_cast<std::uint32_t>(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
  std::uint64_t inc_;
};

// Stream-id allocation. Every consumer of randomness derives its stream from
// the user seed plus one of these bases, so runs are reproducible and
// per-class/per-epoch work is order-independent.
namespace rng_streams {
inline constexpr std::uint64_t kInit = 1;          // parameter initialization
inline constexpr std::uint64_t kWriterSplit = 2;   // writer partition shuffle
inline constexpr std::uint64_t kShuffleBase = 1'000'000;  // + epoch
inline constexpr std::uint64_t kDropoutBase = 2'000'000;  // + epoch
inline constexpr std::uint64_t kAugmentBase = 3'000'000;  // + split*100000 + label
inline constexpr std::uint64_t kSynthRowBase = 4'000'000;    // + row
inline constexpr std::uint64_t kSynthJitterBase = 5'000'000; // + split*100000 + label
inline constexpr std::uint64_t kGradCheck = 6'000'000;
}  // namespace rng_streams

}  // namespace amcr
