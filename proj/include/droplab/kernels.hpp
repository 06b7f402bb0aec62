#pragma once

// Low-level array kernels for the spectral solver hot loops: elementwise
// nonlinearity, per-mode multiplier application and weighted reductions.
// Every kernel has a scalar reference implementation and (on x86-64) an
// AVX2+FMA variant; the active variant is selected once at runtime from
// CPUID and can be forced for equivalence testing.

#include <cstddef>
#include <string>

namespace droplab::kernels {

enum class Backend { scalar, avx2 };

// Backend detected from the CPU at first use (DROPLAB_KERNELS=scalar|avx2
// in the environment overrides it).
Backend active_backend();
void set_backend(Backend b);
bool avx2_available();
std::string backend_name(Backend b);

// ---- reductions ----
double sum(const double* x, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
// sum_i w_i * x_i * y_i  (spectral inner products with multiplier arrays)
double weighted_dot(const double* w, const double* x, const double* y, std::size_t n);
// sum_i w_i * x_i^2
double weighted_sumsq(const double* w, const double* x, std::size_t n);
// sum_i (x_i^2 - 1)^2 / 4   (double-well bulk energy)
double double_well_sum(const double* x, std::size_t n);

// ---- elementwise maps ----
void axpy(double a, const double* x, double* y, std::size_t n);       // y += a*x
void multiply(const double* a, const double* x, double* y, std::size_t n);  // y = a.*x
void double_well_prime(const double* u, double* y, std::size_t n);    // y = u^3 - u
// y = a.*x + b.*z (two multiplier streams)
void combine2(const double* a, const double* x,
              const double* b, const double* z, double* y, std::size_t n);
// y = a.*x + b.*z + c.*w (three multiplier streams; the semi-implicit update)
void combine3(const double* a, const double* x,
              const double* b, const double* z,
              const double* c, const double* w, double* y, std::size_t n);

// Reference implementations, callable directly by the equivalence tests.
namespace scalar {
double sum(const double* x, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
double weighted_dot(const double* w, const double* x, const double* y, std::size_t n);
double weighted_sumsq(const double* w, const double* x, std::size_t n);
double double_well_sum(const double* x, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
void multiply(const double* a, const double* x, double* y, std::size_t n);
void double_well_prime(const double* u, double* y, std::size_t n);
void combine2(const double* a, const double* x,
              const double* b, const double* z, double* y, std::size_t n);
void combine3(const double* a, const double* x,
              const double* b, const double* z,
              const double* c, const double* w, double* y, std::size_t n);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
double sum(const double* x, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
double weighted_dot(const double* w, const double* x, const double* y, std::size_t n);
double weighted_sumsq(const double* w, const double* x, std::size_t n);
double double_well_sum(const double* x, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
void multiply(const double* a, const double* x, double* y, std::size_t n);
void double_well_prime(const double* u, double* y, std::size_t n);
void combine2(const double* a, const double* x,
              const double* b, const double* z, double* y, std::size_t n);
void combine3(const double* a, const double* x,
              const double* b, const double* z,
              const double* c, const double* w, double* y, std::size_t n);
}  // namespace avx2
#endif

}  // namespace droplab::kernels
