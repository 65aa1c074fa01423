#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>

// Shared exp() evaluation used by the scalar and SIMD kernel backends.
//
// exp(x) = 2^k * e^r with k = rne(x * log2(e)) and r = x - k*ln2, r reduced
// via a hi/lo split of ln2, then a rational approximation in r^2 (the
// classic Cephes expd form). Every operation is correctly rounded (mul, fma,
// div), so a vector backend that mirrors this sequence lane-by-lane produces
// bitwise-identical results. Outputs that would be subnormal flush to zero;
// overflow saturates to +inf.

namespace volherd::kern::detail {

inline constexpr double kExpLog2e = 1.4426950408889634073599;  // log2(e)
inline constexpr double kExpShift = 0x1.8p52;                  // 1.5 * 2^52
inline constexpr double kExpLn2Hi = 6.93145751953125e-1;
inline constexpr double kExpLn2Lo = 1.42860682030941723212e-6;

inline constexpr double kExpP0 = 1.26177193074810590878e-4;
inline constexpr double kExpP1 = 3.02994407707441961300e-2;
inline constexpr double kExpP2 = 9.99999999999999999910e-1;

inline constexpr double kExpQ0 = 3.00198505138664455042e-6;
inline constexpr double kExpQ1 = 2.52448340349684104192e-3;
inline constexpr double kExpQ2 = 2.27265548208155028766e-1;
inline constexpr double kExpQ3 = 2.00000000000000000005e0;

// Scale thresholds: 2^k flushes to 0 below kExpKMin, saturates above kExpKMax.
inline constexpr int32_t kExpKMin = -1021;
inline constexpr int32_t kExpKMax = 1023;

// Argument clamp. Anything below kExpXMin underflows to 0 and anything above
// kExpXMax overflows to +inf, so clamping first keeps k inside int32 range.
inline constexpr double kExpXMin = -746.0;
inline constexpr double kExpXMax = 710.0;

inline double exp_core(double x) {
    if (x < kExpXMin) x = kExpXMin;
    if (x > kExpXMax) x = kExpXMax;
    const double t = std::fma(x, kExpLog2e, kExpShift);
    const double kd = t - kExpShift;
    double r = std::fma(kd, -kExpLn2Hi, x);
    r = std::fma(kd, -kExpLn2Lo, r);

    const double r2 = r * r;
    double p = std::fma(kExpP0, r2, kExpP1);
    p = std::fma(p, r2, kExpP2);
    p = p * r;
    double q = std::fma(kExpQ0, r2, kExpQ1);
    q = std::fma(q, r2, kExpQ2);
    q = std::fma(q, r2, kExpQ3);
    const double w = p / (q - p);
    const double e = std::fma(2.0, w, 1.0);

    const auto k = static_cast<int32_t>(kd);
    if (k < kExpKMin) return 0.0;
    if (k > kExpKMax) return std::numeric_limits<double>::infinity();
    const uint64_t scale_bits = static_cast<uint64_t>(k + 1023) << 52;
    return e * std::bit_cast<double>(scale_bits);
}

}  // namespace volherd::kern::detail
