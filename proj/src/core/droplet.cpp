#include "droplab/droplet.hpp"

#include <cmath>

#include "droplab/errors.hpp"
#include "droplab/kernels.hpp"
#include "droplab/spectral.hpp"

namespace droplab::droplet {

namespace {

double boundary_distance(Vec2 xi) {
    return std::min(std::min(xi.x, 1.0 - xi.x), std::min(xi.y, 1.0 - xi.y));
}

// Smallest radius for which the solved branch is trusted; profiles below
// this are close to the existence fold (droplet about to vanish).
constexpr double kMinRescaledRadius = 2.3;

}  // namespace

DropletFamily DropletFamily::create(Grid g, double eps, double rho_phys, double delta,
                                    Vec2 xi0, const radial::RadialOptions& opt) {
    if (!(eps > 0) || !(rho_phys > 0)) throw Error("droplet family: eps, rho_phys > 0 required");
    const double rho0 = rho_phys / eps;
    if (rho0 < kMinRescaledRadius)
        throw OutOfDomain("rescaled radius " + std::to_string(rho0) +
                          " below the existence threshold " + std::to_string(kMinRescaledRadius));
    DropletFamily fam;
    fam.eps = eps;
    fam.rho_phys = rho_phys;
    fam.delta = delta;
    fam.xi0 = xi0;
    fam.grid = g;
    // r_max covers the farthest corner of the unit square with tail room.
    const double r_need = std::sqrt(2.0) / eps + 2.0;
    fam.profile = radial::solve_radial_profile(rho0, std::max(rho0 + 40.0, r_need), 1e-8, opt);
    fam.mass0 = spectral::mass(fam.sample_field(xi0, 0.0));
    return fam;
}

Field DropletFamily::sample_field(Vec2 xi, double a) const {
    Field f(grid);
    const double drho = -a / eps;
    const double inv_eps = 1.0 / eps;
    for (int j = 0; j < grid.ny; ++j) {
        const double dy = grid.y(j) - xi.y;
        for (int i = 0; i < grid.nx; ++i) {
            const double dx = grid.x(i) - xi.x;
            const double s = std::sqrt(dx * dx + dy * dy) * inv_eps;
            f(i, j) = profile.value(s) + drho * profile.rho_deriv(s);
        }
    }
    return f;
}

Field DropletFamily::sample_mass_corrected(Vec2 xi, double mass_target, double* a_out) const {
    Field f(grid);
    avector srho(grid.size());
    const double inv_eps = 1.0 / eps;
    double sum_u = 0.0, sum_rho = 0.0;
    for (int j = 0; j < grid.ny; ++j) {
        const double dy = grid.y(j) - xi.y;
        for (int i = 0; i < grid.nx; ++i) {
            const double dx = grid.x(i) - xi.x;
            const double s = std::sqrt(dx * dx + dy * dy) * inv_eps;
            const double u0 = profile.value(s);
            const double ur = profile.rho_deriv(s);
            f(i, j) = u0;
            srho[static_cast<std::size_t>(j) * grid.nx + i] = ur;
            sum_u += u0;
            sum_rho += ur;
        }
    }
    if (std::abs(sum_rho) < 1e-14) throw RootFindFailure("mass correction: dM/drho vanished");
    const double a = eps * (sum_u * grid.cell_area() - mass_target) /
                     (sum_rho * grid.cell_area());
    const double drho = -a * inv_eps;
    kernels::axpy(drho, srho.data(), f.data(), f.size());
    if (a_out) *a_out = a;
    return f;
}

DropletState DropletFamily::build(Vec2 xi, std::optional<double> mass_target,
                                  bool with_second) const {
    DropletState d;
    d.xi = xi;
    d.eps = eps;
    d.rho_phys = rho_phys;
    d.clearance = boundary_distance(xi) - rho_phys;
    if (d.clearance < delta)
        throw OutOfDomain("droplet at (" + std::to_string(xi.x) + "," + std::to_string(xi.y) +
                          ") has clearance " + std::to_string(d.clearance) +
                          " below delta=" + std::to_string(delta));

    // Mass correction.  Along the sampled family the mass is affine in a:
    //   M(xi, a) = M_S(xi) - (a/eps) M_rho(xi),
    // so the secant step lands on the root immediately; a bracketed check
    // guards the formula.
    double a = 0.0;
    if (mass_target) {
        const Field base = sample_field(xi, 0.0);
        double m_rho = 0.0;
        {
            const double inv_eps = 1.0 / eps;
            for (int j = 0; j < grid.ny; ++j) {
                const double dy = grid.y(j) - xi.y;
                for (int i = 0; i < grid.nx; ++i) {
                    const double dx = grid.x(i) - xi.x;
                    const double s = std::sqrt(dx * dx + dy * dy) * inv_eps;
                    m_rho += profile.rho_deriv(s);
                }
            }
            m_rho *= grid.cell_area();
        }
        const double m_s = spectral::mass(base);
        if (std::abs(m_rho) < 1e-14)
            throw RootFindFailure("mass correction: dM/drho vanished");
        a = eps * (m_s - *mass_target) / m_rho;
        const double check = spectral::mass(sample_field(xi, a));
        if (std::abs(check - *mass_target) > 1e-11) {
            // fall back to a bracketed secant/bisection hybrid
            double lo = a - 0.1 * rho_phys, hi = a + 0.1 * rho_phys;
            auto g = [&](double aa) { return spectral::mass(sample_field(xi, aa)) - *mass_target; };
            double glo = g(lo);
            if (glo * g(hi) > 0) throw RootFindFailure("mass equation not bracketed");
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                const double gm = g(mid);
                a = mid;
                if (std::abs(gm) < 1e-13 || hi - lo < 1e-16) break;
                if (glo * gm <= 0) {
                    hi = mid;
                } else {
                    lo = mid;
                    glo = gm;
                }
            }
        }
    }
    d.a = a;
    d.rho_resc = (rho_phys - a) / eps;

    // Single pass for value, spatial gradient and the family direction.
    const double drho = -a / eps;
    const double inv_eps = 1.0 / eps;
    d.field = Field(grid);
    Field dxu(grid), dyu(grid), srho(grid);
    for (int j = 0; j < grid.ny; ++j) {
        const double dy = grid.y(j) - xi.y;
        for (int i = 0; i < grid.nx; ++i) {
            const double dx = grid.x(i) - xi.x;
            const double r = std::sqrt(dx * dx + dy * dy);
            const double s = r * inv_eps;
            const double up = profile.deriv(s) + drho * profile.urho_spline.deriv(s);
            d.field(i, j) = profile.value(s) + drho * profile.rho_deriv(s);
            srho(i, j) = profile.rho_deriv(s);
            if (r > 1e-14) {
                dxu(i, j) = up * (dx / r) * inv_eps;
                dyu(i, j) = up * (dy / r) * inv_eps;
            } else {
                dxu(i, j) = 0.0;
                dyu(i, j) = 0.0;
            }
        }
    }
    d.mass = spectral::mass(d.field);

    // d a/d xi from the implicit function theorem on the discrete mass.
    Vec2 da{0.0, 0.0};
    if (mass_target && mass_chain_term) {
        const double m_a = -kernels::sum(srho.data(), srho.size()) * grid.cell_area() * inv_eps;
        const double m_x = -kernels::sum(dxu.data(), dxu.size()) * grid.cell_area();
        const double m_y = -kernels::sum(dyu.data(), dyu.size()) * grid.cell_area();
        da = {-m_x / m_a, -m_y / m_a};
    }
    d.da = da;

    d.tangent[0] = Field(grid);
    d.tangent[1] = Field(grid);
    const double cx = -da.x * inv_eps, cy = -da.y * inv_eps;
    for (std::size_t p = 0; p < d.field.size(); ++p) {
        d.tangent[0].v[p] = -dxu.v[p] + cx * srho.v[p];
        d.tangent[1].v[p] = -dyu.v[p] + cy * srho.v[p];
    }

    if (with_second) {
        d.has_second = true;
        for (auto& f : d.second) f = Field(grid);
        const double ie2 = inv_eps * inv_eps;
        for (int j = 0; j < grid.ny; ++j) {
            const double dy = grid.y(j) - xi.y;
            for (int i = 0; i < grid.nx; ++i) {
                const double dx = grid.x(i) - xi.x;
                const double r = std::sqrt(dx * dx + dy * dy);
                const double s = r * inv_eps;
                const double upp = profile.second(s) + drho * profile.urho_spline.second(s);
                if (r > 1e-12) {
                    const double up_over_s =
                        (profile.deriv(s) + drho * profile.urho_spline.deriv(s)) / s;
                    const double nx = dx / r, ny = dy / r;
                    d.second[0](i, j) = ie2 * (upp * nx * nx + up_over_s * (1.0 - nx * nx));
                    d.second[1](i, j) = ie2 * (upp - up_over_s) * nx * ny;
                    d.second[2](i, j) = ie2 * (upp * ny * ny + up_over_s * (1.0 - ny * ny));
                } else {
                    d.second[0](i, j) = ie2 * upp;
                    d.second[1](i, j) = 0.0;
                    d.second[2](i, j) = ie2 * upp;
                }
            }
        }
    }
    return d;
}

}  // namespace droplab::droplet
