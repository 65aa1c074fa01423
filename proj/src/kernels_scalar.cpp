#include <cstddef>

#include "volherd/detail/exp_core.hpp"
#include "volherd/kernels.hpp"

// Reference backend. Reductions spell out the 4-lane order from the header
// contract; vector backends must reproduce these results bit for bit.

namespace volherd::kern {
namespace {

double sum_scalar(const double* x, std::size_t n) {
    double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
    const std::size_t n4 = n & ~std::size_t{3};
    for (std::size_t i = 0; i < n4; i += 4) {
        acc0 += x[i];
        acc1 += x[i + 1];
        acc2 += x[i + 2];
        acc3 += x[i + 3];
    }
    if (n4 + 0 < n) acc0 += x[n4 + 0];
    if (n4 + 1 < n) acc1 += x[n4 + 1];
    if (n4 + 2 < n) acc2 += x[n4 + 2];
    return (acc0 + acc2) + (acc1 + acc3);
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
    double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
    const std::size_t n4 = n & ~std::size_t{3};
    for (std::size_t i = 0; i < n4; i += 4) {
        acc0 = std::fma(x[i], y[i], acc0);
        acc1 = std::fma(x[i + 1], y[i + 1], acc1);
        acc2 = std::fma(x[i + 2], y[i + 2], acc2);
        acc3 = std::fma(x[i + 3], y[i + 3], acc3);
    }
    if (n4 + 0 < n) acc0 = std::fma(x[n4 + 0], y[n4 + 0], acc0);
    if (n4 + 1 < n) acc1 = std::fma(x[n4 + 1], y[n4 + 1], acc1);
    if (n4 + 2 < n) acc2 = std::fma(x[n4 + 2], y[n4 + 2], acc2);
    return (acc0 + acc2) + (acc1 + acc3);
}

void vexp_scalar(const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = detail::exp_core(x[i]);
}

double refresh_rational_scalar(const double* v_in, double* v_out,
                               std::size_t n, double z) {
    double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
    const std::size_t n4 = n & ~std::size_t{3};
    for (std::size_t i = 0; i < n4; i += 4) {
        const double v0 = 1.0 + z / v_in[i];
        const double v1 = 1.0 + z / v_in[i + 1];
        const double v2 = 1.0 + z / v_in[i + 2];
        const double v3 = 1.0 + z / v_in[i + 3];
        v_out[i] = v0;
        v_out[i + 1] = v1;
        v_out[i + 2] = v2;
        v_out[i + 3] = v3;
        acc0 += v0;
        acc1 += v1;
        acc2 += v2;
        acc3 += v3;
    }
    for (std::size_t i = n4; i < n; ++i) {
        const double v = 1.0 + z / v_in[i];
        v_out[i] = v;
        if (i - n4 == 0) acc0 += v;
        if (i - n4 == 1) acc1 += v;
        if (i - n4 == 2) acc2 += v;
    }
    return (acc0 + acc2) + (acc1 + acc3);
}

double refresh_exp_one(double v_in, double c, double d, double v_prev) {
    const double ratio = v_in / v_prev;
    const double e = detail::exp_core(-(d * ratio));
    double a = 1.0 - c * e;
    if (a < kMinTradingProb) a = kMinTradingProb;
    return 1.0 / a;
}

double refresh_exponential_scalar(const double* v_in, double* v_out,
                                  std::size_t n, double c, double d,
                                  double v_prev) {
    double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
    const std::size_t n4 = n & ~std::size_t{3};
    for (std::size_t i = 0; i < n4; i += 4) {
        const double v0 = refresh_exp_one(v_in[i], c, d, v_prev);
        const double v1 = refresh_exp_one(v_in[i + 1], c, d, v_prev);
        const double v2 = refresh_exp_one(v_in[i + 2], c, d, v_prev);
        const double v3 = refresh_exp_one(v_in[i + 3], c, d, v_prev);
        v_out[i] = v0;
        v_out[i + 1] = v1;
        v_out[i + 2] = v2;
        v_out[i + 3] = v3;
        acc0 += v0;
        acc1 += v1;
        acc2 += v2;
        acc3 += v3;
    }
    for (std::size_t i = n4; i < n; ++i) {
        const double v = refresh_exp_one(v_in[i], c, d, v_prev);
        v_out[i] = v;
        if (i - n4 == 0) acc0 += v;
        if (i - n4 == 1) acc1 += v;
        if (i - n4 == 2) acc2 += v;
    }
    return (acc0 + acc2) + (acc1 + acc3);
}

}  // namespace

const Backend& scalar_backend() {
    static const Backend backend{
        "scalar",
        &sum_scalar,
        &dot_scalar,
        &vexp_scalar,
        &refresh_rational_scalar,
        &refresh_exponential_scalar,
    };
    return backend;
}

}  // namespace volherd::kern
