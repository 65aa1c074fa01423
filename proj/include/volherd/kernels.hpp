#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace volherd::kern {

// Arithmetic inner loops of the simulator and the statistics pipeline.
//
// Every backend implements the same fixed evaluation order, so results are
// bitwise identical whichever backend the dispatcher picks:
//   - reductions run in 4 independent accumulator lanes, lane j taking
//     elements i with i % 4 == j in ascending order, combined at the end as
//     (lane0 + lane2) + (lane1 + lane3);
//   - elementwise maps use only correctly-rounded operations (+, *, /, fma)
//     plus the shared exp_core() below, in one pinned sequence.
// Simulation trajectories therefore do not depend on the host ISA.

// Sum of x[0..n).
double sum(const double* x, std::size_t n);

// Dot product of x[0..n) and y[0..n). Lagged autocovariances are
// dot(series, series + tau, n - tau).
double dot(const double* x, const double* y, std::size_t n);

// out[i] = exp(x[i]) to ~2 ulp for finite x in [-708, 709]. Results that
// would be subnormal flush to zero. Intended for probability-kernel
// arguments (x <= 0).
void vexp(const double* x, double* out, std::size_t n);

// Volume refresh for a trade under the rational probability kernel with
// z = b * V_prev:  a_i = 1 / (1 + z / v_in[i]),  v_out[i] = 1 / a_i,
// evaluated as v_out[i] = 1 + z / v_in[i]. Returns sum(v_out[0..n)).
double refresh_volumes_rational(const double* v_in, double* v_out,
                                std::size_t n, double z);

// Lower clamp on a trading probability before inversion; keeps volumes
// finite if exp() rounds to 1. Unreachable at sane parameters.
inline constexpr double kMinTradingProb = 0x1.0p-512;

// Volume refresh under the exponential probability kernel:
//   a_i = 1 - c * exp(-d * (v_in[i] / v_prev)),  v_out[i] = 1 / a_i.
// a_i is clamped to at least kMinTradingProb so volumes stay finite. Returns
// sum(v_out[0..n)).
double refresh_volumes_exponential(const double* v_in, double* v_out,
                                   std::size_t n, double c, double d,
                                   double v_prev);

struct Backend {
    const char* name;
    double (*sum)(const double*, std::size_t);
    double (*dot)(const double*, const double*, std::size_t);
    void (*vexp)(const double*, double*, std::size_t);
    double (*refresh_rational)(const double*, double*, std::size_t, double);
    double (*refresh_exponential)(const double*, double*, std::size_t, double,
                                  double, double);
};

// Currently selected backend. Defaults to the widest one the CPU supports.
const Backend& active();

// Force a backend: "auto", "scalar" or "avx2". Returns false (and leaves the
// selection unchanged) if the request is unavailable on this machine.
bool select(const std::string& name);

// All backends usable on this machine; scalar is always present.
std::vector<const Backend*> available();

const Backend& scalar_backend();

}  // namespace volherd::kern
