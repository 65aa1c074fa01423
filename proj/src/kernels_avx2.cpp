// AVX2/FMA backend. Mirrors the scalar backend operation for operation: each
// intrinsic here is the 4-lane version of the exact instruction sequence in
// kernels_scalar.cpp, so outputs are bitwise identical. Compiled with
// -mavx2 -mfma; only dispatched on CPUs that report both.

#if defined(__x86_64__) || defined(__i386__)

#include <immintrin.h>

#include <cstddef>

#include "volherd/detail/exp_core.hpp"
#include "volherd/kernels.hpp"

namespace volherd::kern {
namespace {

using detail::exp_core;

double sum_avx2(const double* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    const std::size_t n4 = n & ~std::size_t{3};
    for (std::size_t i = 0; i < n4; i += 4) {
        acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    for (std::size_t i = n4; i < n; ++i) lanes[i - n4] += x[i];
    return (lanes[0] + lanes[2]) + (lanes[1] + lanes[3]);
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    const std::size_t n4 = n & ~std::size_t{3};
    for (std::size_t i = 0; i < n4; i += 4) {
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i),
                              acc);
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    for (std::size_t i = n4; i < n; ++i) {
        lanes[i - n4] = std::fma(x[i], y[i], lanes[i - n4]);
    }
    return (lanes[0] + lanes[2]) + (lanes[1] + lanes[3]);
}

inline __m256d exp_pd(__m256d x) {
    x = _mm256_max_pd(x, _mm256_set1_pd(detail::kExpXMin));
    x = _mm256_min_pd(x, _mm256_set1_pd(detail::kExpXMax));

    const __m256d shift = _mm256_set1_pd(detail::kExpShift);
    const __m256d t =
        _mm256_fmadd_pd(x, _mm256_set1_pd(detail::kExpLog2e), shift);
    const __m256d kd = _mm256_sub_pd(t, shift);
    __m256d r =
        _mm256_fmadd_pd(kd, _mm256_set1_pd(-detail::kExpLn2Hi), x);
    r = _mm256_fmadd_pd(kd, _mm256_set1_pd(-detail::kExpLn2Lo), r);

    const __m256d r2 = _mm256_mul_pd(r, r);
    __m256d p = _mm256_fmadd_pd(_mm256_set1_pd(detail::kExpP0), r2,
                                _mm256_set1_pd(detail::kExpP1));
    p = _mm256_fmadd_pd(p, r2, _mm256_set1_pd(detail::kExpP2));
    p = _mm256_mul_pd(p, r);
    __m256d q = _mm256_fmadd_pd(_mm256_set1_pd(detail::kExpQ0), r2,
                                _mm256_set1_pd(detail::kExpQ1));
    q = _mm256_fmadd_pd(q, r2, _mm256_set1_pd(detail::kExpQ2));
    q = _mm256_fmadd_pd(q, r2, _mm256_set1_pd(detail::kExpQ3));
    const __m256d w = _mm256_div_pd(p, _mm256_sub_pd(q, p));
    const __m256d e =
        _mm256_fmadd_pd(_mm256_set1_pd(2.0), w, _mm256_set1_pd(1.0));

    // 2^k via exponent bits; kd is exactly integral and within int32 range.
    const __m128i k32 = _mm256_cvtpd_epi32(kd);
    const __m256i k64 = _mm256_cvtepi32_epi64(k32);
    const __m256i biased =
        _mm256_add_epi64(k64, _mm256_set1_epi64x(1023));
    const __m256d scale =
        _mm256_castsi256_pd(_mm256_slli_epi64(biased, 52));
    __m256d result = _mm256_mul_pd(e, scale);

    const __m256d underflow =
        _mm256_cmp_pd(kd, _mm256_set1_pd(double(detail::kExpKMin)), _CMP_LT_OQ);
    const __m256d overflow =
        _mm256_cmp_pd(kd, _mm256_set1_pd(double(detail::kExpKMax)), _CMP_GT_OQ);
    result = _mm256_andnot_pd(underflow, result);
    result = _mm256_blendv_pd(
        result, _mm256_set1_pd(std::numeric_limits<double>::infinity()),
        overflow);
    return result;
}

void vexp_avx2(const double* x, double* out, std::size_t n) {
    const std::size_t n4 = n & ~std::size_t{3};
    for (std::size_t i = 0; i < n4; i += 4) {
        _mm256_storeu_pd(out + i, exp_pd(_mm256_loadu_pd(x + i)));
    }
    for (std::size_t i = n4; i < n; ++i) out[i] = exp_core(x[i]);
}

double refresh_rational_avx2(const double* v_in, double* v_out, std::size_t n,
                             double z) {
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d zv = _mm256_set1_pd(z);
    __m256d acc = _mm256_setzero_pd();
    const std::size_t n4 = n & ~std::size_t{3};
    for (std::size_t i = 0; i < n4; i += 4) {
        const __m256d v =
            _mm256_add_pd(one, _mm256_div_pd(zv, _mm256_loadu_pd(v_in + i)));
        _mm256_storeu_pd(v_out + i, v);
        acc = _mm256_add_pd(acc, v);
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    for (std::size_t i = n4; i < n; ++i) {
        const double v = 1.0 + z / v_in[i];
        v_out[i] = v;
        lanes[i - n4] += v;
    }
    return (lanes[0] + lanes[2]) + (lanes[1] + lanes[3]);
}

double refresh_exponential_avx2(const double* v_in, double* v_out,
                                std::size_t n, double c, double d,
                                double v_prev) {
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d cv = _mm256_set1_pd(c);
    const __m256d dv = _mm256_set1_pd(d);
    const __m256d vp = _mm256_set1_pd(v_prev);
    const __m256d amin = _mm256_set1_pd(kMinTradingProb);
    const __m256d negzero = _mm256_set1_pd(-0.0);
    __m256d acc = _mm256_setzero_pd();
    const std::size_t n4 = n & ~std::size_t{3};
    for (std::size_t i = 0; i < n4; i += 4) {
        const __m256d ratio = _mm256_div_pd(_mm256_loadu_pd(v_in + i), vp);
        const __m256d x = _mm256_xor_pd(_mm256_mul_pd(dv, ratio), negzero);
        const __m256d e = exp_pd(x);
        __m256d a = _mm256_sub_pd(one, _mm256_mul_pd(cv, e));
        a = _mm256_max_pd(a, amin);
        const __m256d v = _mm256_div_pd(one, a);
        _mm256_storeu_pd(v_out + i, v);
        acc = _mm256_add_pd(acc, v);
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    for (std::size_t i = n4; i < n; ++i) {
        const double ratio = v_in[i] / v_prev;
        const double e = exp_core(-(d * ratio));
        double a = 1.0 - c * e;
        if (a < kMinTradingProb) a = kMinTradingProb;
        const double v = 1.0 / a;
        v_out[i] = v;
        lanes[i - n4] += v;
    }
    return (lanes[0] + lanes[2]) + (lanes[1] + lanes[3]);
}

}  // namespace

const Backend* avx2_backend_if_compiled() {
    static const Backend backend{
        "avx2",
        &sum_avx2,
        &dot_avx2,
        &vexp_avx2,
        &refresh_rational_avx2,
        &refresh_exponential_avx2,
    };
    return &backend;
}

}  // namespace volherd::kern

#endif  // x86
