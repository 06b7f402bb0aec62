#pragma once

// Grid, real-space fields and cosine-coefficient arrays on the unit square.
// All values are stored row-major (index = j*nx + i, x varying fastest) in
// 64-byte aligned buffers shared with FFTW and the SIMD kernels.

#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <new>
#include <vector>

namespace droplab {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}
    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double norm() const { return std::sqrt(x * x + y * y); }
};

template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::size_t alignment = 64;

    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) {}

    T* allocate(std::size_t n) {
        void* p = std::aligned_alloc(alignment, ((n * sizeof(T) + alignment - 1) / alignment) * alignment);
        if (!p) throw std::bad_alloc();
        return static_cast<T*>(p);
    }
    void deallocate(T* p, std::size_t) noexcept { std::free(p); }

    template <class U>
    bool operator==(const AlignedAllocator<U>&) const { return true; }
};

using avector = std::vector<double, AlignedAllocator<double>>;

// Uniform cell-centered tensor grid on [0,1] x [0,1].
struct Grid {
    int nx = 0;
    int ny = 0;
    double hx = 0.0;
    double hy = 0.0;

    Grid() = default;
    Grid(int nx_, int ny_) : nx(nx_), ny(ny_), hx(1.0 / nx_), hy(1.0 / ny_) {}
    static Grid unit_square(int n) { return Grid(n, n); }

    std::size_t size() const { return static_cast<std::size_t>(nx) * ny; }
    double x(int i) const { return (i + 0.5) * hx; }
    double y(int j) const { return (j + 0.5) * hy; }
    double cell_area() const { return hx * hy; }
    bool operator==(const Grid& o) const { return nx == o.nx && ny == o.ny; }
    bool operator!=(const Grid& o) const { return !(*this == o); }
};

struct Field {
    Grid grid;
    avector v;

    Field() = default;
    explicit Field(Grid g) : grid(g), v(g.size(), 0.0) {}
    double& operator()(int i, int j) { return v[static_cast<std::size_t>(j) * grid.nx + i]; }
    double operator()(int i, int j) const { return v[static_cast<std::size_t>(j) * grid.nx + i]; }
    double* data() { return v.data(); }
    const double* data() const { return v.data(); }
    std::size_t size() const { return v.size(); }
};

// Coefficients of the L2-orthonormal cosine basis
//   phi_{kl}(x,y) = c_k c_l cos(pi k x) cos(pi l y),  c_0 = 1, c_k = sqrt(2),
// sampled at cell centers; entry (k,l) lives at index l*nx + k.  Coefficient
// (0,0) equals the field mean (normalization constant 1).
struct SpectralCoeffs {
    Grid grid;
    avector c;

    SpectralCoeffs() = default;
    explicit SpectralCoeffs(Grid g) : grid(g), c(g.size(), 0.0) {}
    double& operator()(int k, int l) { return c[static_cast<std::size_t>(l) * grid.nx + k]; }
    double operator()(int k, int l) const { return c[static_cast<std::size_t>(l) * grid.nx + k]; }
    double* data() { return c.data(); }
    const double* data() const { return c.data(); }
    std::size_t size() const { return c.size(); }
};

}  // namespace droplab
