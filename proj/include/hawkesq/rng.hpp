#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

#include "hawkesq/errors.hpp"

namespace hawkesq {

/// Philox4x32-10 block function (Salmon et al., Random123). Stateless: maps a
/// 128-bit counter and 64-bit key to 128 pseudo-random bits.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static constexpr Counter apply(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }
};

/// Counter-based random stream identified by (master seed, stream id, substream).
///
/// Replication r of an experiment uses stream id r; independent purposes within a
/// replication (arrivals, service times, initial queue) use distinct substreams.
/// Streams never share counters, so results do not depend on execution order or
/// thread count. Satisfies UniformRandomBitGenerator.
class Stream {
 public:
  using result_type = std::uint32_t;

  Stream(std::uint64_t seed, std::uint64_t stream_id, std::uint32_t substream = 0) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_lo_(static_cast<std::uint32_t>(stream_id)),
        stream_hi_(static_cast<std::uint32_t>(stream_id >> 32)),
        substream_(substream) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (lane_ == 4) refill();
    return block_[lane_++];
  }

  /// Uniform on the open interval (0, 1) with 53 random bits.
  double uniform() {
    const std::uint64_t hi = (*this)();
    const std::uint64_t lo = (*this)();
    const std::uint64_t bits = ((hi << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

  /// Standard normal by Box-Muller; the second variate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double angle = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(angle);
    has_spare_ = true;
    return r * std::cos(angle);
  }

  /// Poisson variate. Small means use the product-of-uniforms method; larger
  /// means count unit-rate exponential gaps in [0, mean], which is exact and
  /// costs O(mean).
  std::uint64_t poisson(double mean) {
    if (!(mean >= 0.0) || !std::isfinite(mean)) throw ArgumentError("poisson: mean must be finite and >= 0");
    if (mean == 0.0) return 0;
    if (mean < 30.0) {
      const double limit = std::exp(-mean);
      std::uint64_t k = 0;
      double prod = uniform();
      while (prod > limit) {
        ++k;
        prod *= uniform();
      }
      return k;
    }
    std::uint64_t k = 0;
    double t = exponential(1.0);
    while (t <= mean) {
      ++k;
      t += exponential(1.0);
    }
    return k;
  }

  std::uint64_t blocks_used() const noexcept { return block_index_; }

 private:
  void refill() {
    if (block_index_ > std::numeric_limits<std::uint32_t>::max())
      throw NumericalError("random stream exhausted (2^32 blocks)");
    block_ = Philox4x32::apply(
        {static_cast<std::uint32_t>(block_index_), substream_, stream_lo_, stream_hi_}, key_);
    ++block_index_;
    lane_ = 0;
  }

  Philox4x32::Key key_;
  std::uint32_t stream_lo_;
  std::uint32_t stream_hi_;
  std::uint32_t substream_;
  std::uint64_t block_index_ = 0;
  Philox4x32::Counter block_{};
  int lane_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Substream tags used across the library.
namespace substream {
inline constexpr std::uint32_t kArrivals = 0;
inline constexpr std::uint32_t kService = 1;
inline constexpr std::uint32_t kInitialQueue = 2;
inline constexpr std::uint32_t kGaussian = 3;
}  // namespace substream

}  // namespace hawkesq
