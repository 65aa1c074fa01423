#include <atomic>
#include <string>
#include <vector>

#include "volherd/kernels.hpp"

namespace volherd::kern {

#if defined(__x86_64__) || defined(__i386__)
const Backend* avx2_backend_if_compiled();  // defined in kernels_avx2.cpp

static const Backend* avx2_backend() {
    if (!__builtin_cpu_supports("avx2") || !__builtin_cpu_supports("fma")) {
        return nullptr;
    }
    return avx2_backend_if_compiled();
}
#else
static const Backend* avx2_backend() { return nullptr; }
#endif

namespace {

std::atomic<const Backend*> g_active{nullptr};

const Backend* default_backend() {
    if (const Backend* b = avx2_backend()) return b;
    return &scalar_backend();
}

const Backend* current() {
    const Backend* b = g_active.load(std::memory_order_acquire);
    if (!b) {
        b = default_backend();
        g_active.store(b, std::memory_order_release);
    }
    return b;
}

}  // namespace

const Backend& active() { return *current(); }

bool select(const std::string& name) {
    const Backend* b = nullptr;
    if (name == "auto") {
        b = default_backend();
    } else if (name == "scalar") {
        b = &scalar_backend();
    } else if (name == "avx2") {
        b = avx2_backend();
    }
    if (!b) return false;
    g_active.store(b, std::memory_order_release);
    return true;
}

std::vector<const Backend*> available() {
    std::vector<const Backend*> out{&scalar_backend()};
    if (const Backend* b = avx2_backend()) out.push_back(b);
    return out;
}

double sum(const double* x, std::size_t n) { return current()->sum(x, n); }

double dot(const double* x, const double* y, std::size_t n) {
    return current()->dot(x, y, n);
}

void vexp(const double* x, double* out, std::size_t n) {
    current()->vexp(x, out, n);
}

double refresh_volumes_rational(const double* v_in, double* v_out,
                                std::size_t n, double z) {
    return current()->refresh_rational(v_in, v_out, n, z);
}

double refresh_volumes_exponential(const double* v_in, double* v_out,
                                   std::size_t n, double c, double d,
                                   double v_prev) {
    return current()->refresh_exponential(v_in, v_out, n, c, d, v_prev);
}

}  // namespace volherd::kern
