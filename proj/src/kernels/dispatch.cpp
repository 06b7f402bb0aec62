#include <atomic>
#include <cstdlib>
#include <cstring>

#include "droplab/kernels.hpp"

namespace droplab::kernels {

bool avx2_available() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

namespace {

Backend detect() {
    if (const char* env = std::getenv("DROPLAB_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
        if (std::strcmp(env, "avx2") == 0 && avx2_available()) return Backend::avx2;
    }
    return avx2_available() ? Backend::avx2 : Backend::scalar;
}

std::atomic<Backend>& backend_slot() {
    static std::atomic<Backend> b{detect()};
    return b;
}

}  // namespace

Backend active_backend() { return backend_slot().load(std::memory_order_relaxed); }

void set_backend(Backend b) {
    if (b == Backend::avx2 && !avx2_available()) b = Backend::scalar;
    backend_slot().store(b, std::memory_order_relaxed);
}

std::string backend_name(Backend b) {
    return b == Backend::avx2 ? "avx2" : "scalar";
}

#if defined(__x86_64__) || defined(_M_X64)
#define DROPLAB_DISPATCH(call) \
    return active_backend() == Backend::avx2 ? avx2::call : scalar::call
#else
#define DROPLAB_DISPATCH(call) return scalar::call
#endif

double sum(const double* x, std::size_t n) { DROPLAB_DISPATCH(sum(x, n)); }

double dot(const double* x, const double* y, std::size_t n) { DROPLAB_DISPATCH(dot(x, y, n)); }

double weighted_dot(const double* w, const double* x, const double* y, std::size_t n) {
    DROPLAB_DISPATCH(weighted_dot(w, x, y, n));
}

double weighted_sumsq(const double* w, const double* x, std::size_t n) {
    DROPLAB_DISPATCH(weighted_sumsq(w, x, n));
}

double double_well_sum(const double* x, std::size_t n) { DROPLAB_DISPATCH(double_well_sum(x, n)); }

#if defined(__x86_64__) || defined(_M_X64)
#define DROPLAB_DISPATCH_VOID(call)               \
    if (active_backend() == Backend::avx2) {      \
        avx2::call;                               \
    } else {                                      \
        scalar::call;                             \
    }
#else
#define DROPLAB_DISPATCH_VOID(call) scalar::call
#endif

void axpy(double a, const double* x, double* y, std::size_t n) {
    DROPLAB_DISPATCH_VOID(axpy(a, x, y, n));
}

void multiply(const double* a, const double* x, double* y, std::size_t n) {
    DROPLAB_DISPATCH_VOID(multiply(a, x, y, n));
}

void double_well_prime(const double* u, double* y, std::size_t n) {
    DROPLAB_DISPATCH_VOID(double_well_prime(u, y, n));
}

void combine2(const double* a, const double* x,
              const double* b, const double* z, double* y, std::size_t n) {
    DROPLAB_DISPATCH_VOID(combine2(a, x, b, z, y, n));
}

void combine3(const double* a, const double* x,
              const double* b, const double* z,
              const double* c, const double* w, double* y, std::size_t n) {
    DROPLAB_DISPATCH_VOID(combine3(a, x, b, z, c, w, y, n));
}

}  // namespace droplab::kernels
