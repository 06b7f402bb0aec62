// AVX2+FMA kernel variants. This translation unit is compiled with
// -mavx2 -mfma; callers reach it only after the runtime CPUID check.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include "droplab/kernels.hpp"

namespace droplab::kernels::avx2 {

namespace {
inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}
}  // namespace

double sum(const double* x, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
        acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x + i + 4));
    }
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += x[i];
    return s;
}

double dot(const double* x, const double* y, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
    }
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

double weighted_dot(const double* w, const double* x, const double* y, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d p = _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(w + i), p, acc);
    }
    double s = hsum(acc);
    for (; i < n; ++i) s += w[i] * x[i] * y[i];
    return s;
}

double weighted_sumsq(const double* w, const double* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d xv = _mm256_loadu_pd(x + i);
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(w + i), _mm256_mul_pd(xv, xv), acc);
    }
    double s = hsum(acc);
    for (; i < n; ++i) s += w[i] * x[i] * x[i];
    return s;
}

double double_well_sum(const double* x, std::size_t n) {
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d quarter = _mm256_set1_pd(0.25);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_loadu_pd(x + i);
        __m256d q = _mm256_fmsub_pd(v, v, one);
        acc = _mm256_fmadd_pd(quarter, _mm256_mul_pd(q, q), acc);
    }
    double s = hsum(acc);
    for (; i < n; ++i) {
        const double q = x[i] * x[i] - 1.0;
        s += 0.25 * q * q;
    }
    return s;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

void multiply(const double* a, const double* x, double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) y[i] = a[i] * x[i];
}

void double_well_prime(const double* u, double* y, std::size_t n) {
    const __m256d one = _mm256_set1_pd(1.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_loadu_pd(u + i);
        __m256d q = _mm256_fmsub_pd(v, v, one);  // u^2 - 1
        _mm256_storeu_pd(y + i, _mm256_mul_pd(v, q));
    }
    for (; i < n; ++i) y[i] = u[i] * (u[i] * u[i] - 1.0);
}

void combine2(const double* a, const double* x,
              const double* b, const double* z, double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d r = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(x + i));
        r = _mm256_fmadd_pd(_mm256_loadu_pd(b + i), _mm256_loadu_pd(z + i), r);
        _mm256_storeu_pd(y + i, r);
    }
    for (; i < n; ++i) y[i] = a[i] * x[i] + b[i] * z[i];
}

void combine3(const double* a, const double* x,
              const double* b, const double* z,
              const double* c, const double* w, double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d r = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(x + i));
        r = _mm256_fmadd_pd(_mm256_loadu_pd(b + i), _mm256_loadu_pd(z + i), r);
        r = _mm256_fmadd_pd(_mm256_loadu_pd(c + i), _mm256_loadu_pd(w + i), r);
        _mm256_storeu_pd(y + i, r);
    }
    for (; i < n; ++i) y[i] = a[i] * x[i] + b[i] * z[i] + c[i] * w[i];
}

}  // namespace droplab::kernels::avx2

#endif  // x86-64
