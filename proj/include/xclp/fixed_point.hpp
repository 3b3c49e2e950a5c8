#ifndef XCLP_FIXED_POINT_HPP_
#define XCLP_FIXED_POINT_HPP_

#include <cmath>
#include <cstdint>
#include <stdexcept>

// Fixed-point encoding into the ring Z_{2^64}. Addition in the ring matches
// addition of encoded reals as long as magnitudes stay below the overflow
// bound, which callers must check via max_magnitude().

namespace xclp {

struct FixedPointCodec {
  int fraction_bits = 24;

  std::uint64_t encode(double x) const {
    double scaled = x * std::exp2(fraction_bits);
    if (!std::isfinite(scaled) || std::abs(scaled) >= 0x1.0p62)
      throw std::overflow_error("fixed-point encode overflow");
    return static_cast<std::uint64_t>(static_cast<std::int64_t>(std::llround(scaled)));
  }

  double decode(std::uint64_t v) const {
    return static_cast<double>(static_cast<std::int64_t>(v)) * std::exp2(-fraction_bits);
  }

  double resolution() const { return std::exp2(-fraction_bits); }

  // Largest per-entry magnitude that keeps a sum of `parties` encoded values
  // inside the signed range.
  double max_magnitude(int parties) const {
    return std::exp2(63 - fraction_bits) / static_cast<double>(parties);
  }
};

}  // namespace xclp

#endif  // XCLP_FIXED_POINT_HPP_
