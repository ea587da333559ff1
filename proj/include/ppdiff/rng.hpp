#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace ppdiff {

/// What a random stream is used for. Part of the stream key, so that e.g. the
/// centre draws of realisation 7 never share bits with its cluster draws.
enum class Purpose : std::uint32_t {
  centres = 1,
  clusters = 2,
  renewal = 3,
  marks = 4,
  branching = 5,
  occupation = 6,
  test = 99,
};

namespace detail {

inline void philox_round(std::array<std::uint32_t, 4>& ctr, const std::array<std::uint32_t, 2>& key) {
  constexpr std::uint64_t mul_a = 0xD2511F53u;
  constexpr std::uint64_t mul_b = 0xCD9E8D57u;
  const std::uint64_t p0 = mul_a * ctr[0];
  const std::uint64_t p1 = mul_b * ctr[2];
  const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const auto lo0 = static_cast<std::uint32_t>(p0);
  const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const auto lo1 = static_cast<std::uint32_t>(p1);
  ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

}  // namespace detail

/// Philox4x32-10 block function (Salmon et al., SC'11).
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t weyl_a = 0x9E3779B9u;
  constexpr std::uint32_t weyl_b = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += weyl_a;
      key[1] += weyl_b;
    }
    detail::philox_round(ctr, key);
  }
  return ctr;
}

/// Counter-based stream keyed by (seed, realisation, purpose).
///
/// The 64-bit seed is the Philox key; the counter is
/// (block_lo, block_hi, realisation, purpose). Each block yields two 64-bit
/// outputs. Streams with different (realisation, purpose) pairs are
/// independent by construction, which makes realisation-parallel runs
/// reproducible regardless of scheduling. Satisfies
/// UniformRandomBitGenerator, so the <random> distributions apply directly.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint32_t realisation, Purpose purpose)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        realisation_(realisation),
        purpose_(static_cast<std::uint32_t>(purpose)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (slot_ == 2) refill();
    return buffer_[slot_++];
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  std::uint64_t blocks_used() const { return block_; }

 private:
  void refill() {
    const auto out = philox4x32({static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                                 realisation_, purpose_},
                                key_);
    ++block_;
    buffer_[0] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
    buffer_[1] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
    slot_ = 0;
  }

  std::array<std::uint32_t, 2> key_;
  std::uint32_t realisation_;
  std::uint32_t purpose_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int slot_ = 2;
};

}  // namespace ppdiff
