#include "droplab/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <memory>
#include <mutex>

#include "droplab/errors.hpp"
#include "droplab/kernels.hpp"

namespace droplab::spectral {

namespace {
constexpr double kPi = 3.14159265358979323846;
std::mutex planner_mutex;  // FFTW planning is not thread-safe
}

Transform::Transform(Grid g) : grid_(g) {
    const int nx = g.nx, ny = g.ny;
    const std::size_t n = g.size();
    fwd_scale_.resize(n);
    inv_scale_.resize(n);
    mu_.resize(n);
    inv_mu_.resize(n);
    sqrt_mu_.resize(n);

    // REDFT10 emits X_kl = 4 sum f cos cos; orthonormal coefficients are
    // c_k c_l / (4 nx ny) X_kl with c_0 = 1, c_k = sqrt(2).  The inverse
    // REDFT01 wants Y_kl = c_hat_kl * (c_k/2')(c_l/2') with 2' = 1 for the
    // zero mode and 2 otherwise.
    for (int l = 0; l < ny; ++l) {
        const double cl = (l == 0) ? 1.0 : std::sqrt(2.0);
        const double il = (l == 0) ? 1.0 : 0.5;
        for (int k = 0; k < nx; ++k) {
            const double ck = (k == 0) ? 1.0 : std::sqrt(2.0);
            const double ik = (k == 0) ? 1.0 : 0.5;
            const std::size_t idx = static_cast<std::size_t>(l) * nx + k;
            fwd_scale_[idx] = ck * cl / (4.0 * nx * ny);
            inv_scale_[idx] = ck * ik * cl * il;
            const double m = kPi * kPi * (static_cast<double>(k) * k + static_cast<double>(l) * l);
            mu_[idx] = m;
            inv_mu_[idx] = (idx == 0) ? 0.0 : 1.0 / m;
            sqrt_mu_[idx] = std::sqrt(m);
        }
    }

    std::lock_guard<std::mutex> lock(planner_mutex);
    avector a(n), b(n);
    // FFTW_ESTIMATE keeps plan selection independent of timing noise, which
    // the bit-reproducibility contract requires.
    plan_fwd_ = fftw_plan_r2r_2d(ny, nx, a.data(), b.data(),
                                 FFTW_REDFT10, FFTW_REDFT10, FFTW_ESTIMATE);
    plan_inv_ = fftw_plan_r2r_2d(ny, nx, a.data(), b.data(),
                                 FFTW_REDFT01, FFTW_REDFT01, FFTW_ESTIMATE);
}

const Transform& Transform::get(Grid g) {
    static std::mutex cache_mutex;
    static std::map<std::pair<int, int>, std::unique_ptr<Transform>> cache;
    std::lock_guard<std::mutex> lock(cache_mutex);
    auto& slot = cache[{g.nx, g.ny}];
    if (!slot) slot.reset(new Transform(g));
    return *slot;
}

void Transform::forward(const Field& f, SpectralCoeffs& out) const {
    if (f.grid != grid_) throw Error("transform/grid mismatch");
    out.grid = grid_;
    out.c.resize(grid_.size());
    fftw_execute_r2r(static_cast<fftw_plan>(plan_fwd_),
                     const_cast<double*>(f.data()), out.data());
    kernels::multiply(fwd_scale_.data(), out.data(), out.data(), out.size());
}

void Transform::inverse(const SpectralCoeffs& c, Field& out) const {
    if (c.grid != grid_) throw Error("transform/grid mismatch");
    out.grid = grid_;
    out.v.resize(grid_.size());
    avector tmp(grid_.size());
    kernels::multiply(inv_scale_.data(), c.data(), tmp.data(), tmp.size());
    fftw_execute_r2r(static_cast<fftw_plan>(plan_inv_), tmp.data(), out.data());
}

SpectralCoeffs Transform::forward(const Field& f) const {
    SpectralCoeffs c(grid_);
    forward(f, c);
    return c;
}

Field Transform::inverse(const SpectralCoeffs& c) const {
    Field f(grid_);
    inverse(c, f);
    return f;
}

namespace {

const Transform& tr(const Field& f) { return Transform::get(f.grid); }

void require_zero_mean(const Field& f, const char* who) {
    const double m = mean(f);
    const double l2 = norm_l2(f);
    if (std::abs(m) > 1e-10 * (l2 > 0 ? l2 : 1.0))
        throw NonzeroMean(std::string(who) + ": |mean| = " + std::to_string(std::abs(m)));
}

}  // namespace

Field laplacian(const Field& f) {
    const Transform& t = tr(f);
    SpectralCoeffs c = t.forward(f);
    for (std::size_t i = 0; i < c.size(); ++i) c.c[i] *= -t.mu()[i];
    return t.inverse(c);
}

Field inv_laplacian_zero_mean(const Field& f) {
    require_zero_mean(f, "inv_laplacian_zero_mean");
    const Transform& t = tr(f);
    SpectralCoeffs c = t.forward(f);
    kernels::multiply(t.inv_mu().data(), c.data(), c.data(), c.size());
    return t.inverse(c);
}

Field project_zero_mean(const Field& f) {
    Field g = f;
    const double m = mean(f);
    for (double& x : g.v) x -= m;
    return g;
}

double mean(const Field& f) {
    return kernels::sum(f.data(), f.size()) / static_cast<double>(f.size());
}

double mass(const Field& f) {
    return kernels::sum(f.data(), f.size()) * f.grid.cell_area();
}

double inner_l2(const Field& f, const Field& g) {
    if (f.grid != g.grid) throw Error("inner_l2: grid mismatch");
    return kernels::dot(f.data(), g.data(), f.size()) * f.grid.cell_area();
}

double norm_l2(const Field& f) { return std::sqrt(inner_l2(f, f)); }

double norm_l2(const SpectralCoeffs& c) {
    return std::sqrt(kernels::dot(c.data(), c.data(), c.size()));
}

double norm_hm1(const SpectralCoeffs& c) {
    const Transform& t = Transform::get(c.grid);
    return std::sqrt(kernels::weighted_sumsq(t.inv_mu().data(), c.data(), c.size()));
}

double norm_h1(const SpectralCoeffs& c) {
    const Transform& t = Transform::get(c.grid);
    return std::sqrt(kernels::weighted_sumsq(t.mu().data(), c.data(), c.size()));
}

double norm_h2(const SpectralCoeffs& c) {
    const Transform& t = Transform::get(c.grid);
    avector mu2(c.size());
    kernels::multiply(t.mu().data(), t.mu().data(), mu2.data(), mu2.size());
    return std::sqrt(kernels::weighted_sumsq(mu2.data(), c.data(), c.size()));
}

double inner_hm1(const SpectralCoeffs& a, const SpectralCoeffs& b) {
    if (a.grid != b.grid) throw Error("inner_hm1: grid mismatch");
    const Transform& t = Transform::get(a.grid);
    return kernels::weighted_dot(t.inv_mu().data(), a.data(), b.data(), a.size());
}

double inner_l2(const SpectralCoeffs& a, const SpectralCoeffs& b) {
    if (a.grid != b.grid) throw Error("inner_l2: grid mismatch");
    return kernels::dot(a.data(), b.data(), a.size());
}

double norm_hm1(const Field& f) {
    require_zero_mean(f, "norm_hm1");
    return norm_hm1(tr(f).forward(f));
}

double norm_h1(const Field& f) { return norm_h1(tr(f).forward(f)); }

double norm_h2(const Field& f) { return norm_h2(tr(f).forward(f)); }

double inner_hm1(const Field& f, const Field& g) {
    if (f.grid != g.grid) throw Error("inner_hm1: grid mismatch");
    const Transform& t = tr(f);
    return inner_hm1(t.forward(f), t.forward(g));
}

double energy(const Field& u, double eps) {
    if (!(eps > 0)) throw Error("energy: eps must be positive");
    const Transform& t = tr(u);
    const SpectralCoeffs c = t.forward(u);
    const double grad2 = kernels::weighted_sumsq(t.mu().data(), c.data(), c.size());
    const double bulk = kernels::double_well_sum(u.data(), u.size()) * u.grid.cell_area();
    return 0.5 * eps * eps * grad2 + bulk;
}

// Flat binary container: magic, nx, ny, row-major doubles.
namespace {
constexpr std::uint32_t kFieldMagic = 0x444c4631;  // "DLF1"
}

void write_field_binary(const Field& f, const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw Error("cannot open " + path + " for writing");
    const std::uint32_t hdr[3] = {kFieldMagic, static_cast<std::uint32_t>(f.grid.nx),
                                  static_cast<std::uint32_t>(f.grid.ny)};
    std::fwrite(hdr, sizeof(hdr), 1, fp);
    std::fwrite(f.data(), sizeof(double), f.size(), fp);
    std::fclose(fp);
}

Field read_field_binary(const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw Error("cannot open " + path);
    std::uint32_t hdr[3];
    if (std::fread(hdr, sizeof(hdr), 1, fp) != 1 || hdr[0] != kFieldMagic) {
        std::fclose(fp);
        throw Error(path + " is not a field container");
    }
    Field f(Grid(static_cast<int>(hdr[1]), static_cast<int>(hdr[2])));
    const std::size_t got = std::fread(f.data(), sizeof(double), f.size(), fp);
    std::fclose(fp);
    if (got != f.size()) throw Error(path + ": truncated field data");
    return f;
}

void write_field_csv(const Field& f, const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw Error("cannot open " + path + " for writing");
    std::fprintf(fp, "x,y,value\n");
    for (int j = 0; j < f.grid.ny; ++j)
        for (int i = 0; i < f.grid.nx; ++i)
            std::fprintf(fp, "%.17g,%.17g,%.17g\n", f.grid.x(i), f.grid.y(j), f(i, j));
    std::fclose(fp);
}

}  // namespace droplab::spectral
