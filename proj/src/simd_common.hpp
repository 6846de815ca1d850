#pragma once

// Shared scalar pieces of the weight kernels. Included by every backend so the
// tails of vector loops run exactly the reference arithmetic.

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>

#include "anneal/simd.hpp"

namespace anneal::simd::detail {

inline constexpr double kLog2e = 1.4426950408889634074;
// ln 2 split so that n * kLn2Hi is exact for |n| <= 2048.
inline constexpr double kLn2Hi = 6.93147180369123816490e-01;
inline constexpr double kLn2Lo = 1.90821492927058770002e-10;

// Taylor coefficients 1/k!, k = 12 .. 2; |r| <= ln2/2 keeps the truncation
// error below 2.5e-16 relative.
inline constexpr double kExpPoly[] = {
    2.08767569878680989792e-09, 2.50521083854417187751e-08,
    2.75573192239858906526e-07, 2.75573192239858906526e-06,
    2.48015873015873015873e-05, 1.98412698412698412698e-04,
    1.38888888888888888889e-03, 8.33333333333333333333e-03,
    4.16666666666666666667e-02, 1.66666666666666666667e-01,
    5.00000000000000000000e-01,
};

inline double exp_ref(double x) noexcept {
  if (std::isnan(x)) return x;
  if (x < kExpLow) return 0.0;
  if (x > kExpHigh) return std::numeric_limits<double>::infinity();
  const double n = std::nearbyint(x * kLog2e);
  double r = x - n * kLn2Hi;
  r = r - n * kLn2Lo;
  double p = kExpPoly[0];
  for (int k = 1; k < 11; ++k) p = p * r + kExpPoly[k];
  p = p * r + 1.0;
  p = p * r + 1.0;
  // 2^(n-1) * 2 keeps the biased exponent in range for n in [-1021, 1024].
  const auto bits = static_cast<std::uint64_t>(static_cast<std::int64_t>(n) - 1 + 1023) << 52;
  return p * std::bit_cast<double>(bits) * 2.0;
}

inline double combine(const double* lanes) noexcept {
  return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

}  // namespace anneal::simd::detail
