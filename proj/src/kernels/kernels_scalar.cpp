#include "droplab/kernels.hpp"

namespace droplab::kernels::scalar {

double sum(const double* x, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
}

double dot(const double* x, const double* y, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

double weighted_dot(const double* w, const double* x, const double* y, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += w[i] * x[i] * y[i];
    return s;
}

double weighted_sumsq(const double* w, const double* x, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += w[i] * x[i] * x[i];
    return s;
}

double double_well_sum(const double* x, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double q = x[i] * x[i] - 1.0;
        s += 0.25 * q * q;
    }
    return s;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void multiply(const double* a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = a[i] * x[i];
}

void double_well_prime(const double* u, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = u[i] * (u[i] * u[i] - 1.0);
}

void combine2(const double* a, const double* x,
              const double* b, const double* z, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = a[i] * x[i] + b[i] * z[i];
}

void combine3(const double* a, const double* x,
              const double* b, const double* z,
              const double* c, const double* w, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = a[i] * x[i] + b[i] * z[i] + c[i] * w[i];
}

}  // namespace droplab::kernels::scalar
