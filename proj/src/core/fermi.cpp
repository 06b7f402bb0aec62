#include "droplab/fermi.hpp"

#include <cmath>
#include <string>

#include "droplab/errors.hpp"
#include "droplab/kernels.hpp"
#include "droplab/spectral.hpp"

namespace droplab::fermi {

using spectral::Transform;

FrameCache::FrameCache(const droplet::DropletFamily& fam, linop::EigenOptions eopt,
                       double refresh_factor, bool transport, double fd_step)
    : fam_(&fam), eopt_(eopt), refresh_factor_(refresh_factor), transport_(transport),
      fd_step_(fd_step) {}

void FrameCache::rebuild(Vec2 xi) {
    Frame f;
    f.state = fam_->build(xi);
    f.eigen = linop::leading_eigenpairs(f.state, 3, eopt_);
    eigensolves_ += 3;
    frame_ = std::move(f);
    base_ = xi;
    has_ = true;

    // FD Jacobian of g_i(xi) = <u - u~^xi, psi_i>: only the droplet part
    // depends on xi at frozen basis, so J_ij = -<d u~/d xi_j, psi_i> + O(v).
    const Transform& t = Transform::get(fam_->grid);
    const double h = 1e-6;
    Mat2 J{};
    const std::array<Vec2, 2> e{Vec2{1.0, 0.0}, Vec2{0.0, 1.0}};
    for (int j = 0; j < 2; ++j) {
        double ap, am;
        const SpectralCoeffs up =
            t.forward(fam_->sample_mass_corrected(xi + e[j] * h, fam_->mass0, &ap));
        const SpectralCoeffs um =
            t.forward(fam_->sample_mass_corrected(xi - e[j] * h, fam_->mass0, &am));
        for (int i = 0; i < 2; ++i) {
            // g_i depends on -u~^xi
            J[i][j] = -(spectral::inner_hm1(up, frame_.eigen.psi_hat[i]) -
                        spectral::inner_hm1(um, frame_.eigen.psi_hat[i])) /
                      (2.0 * h);
        }
    }
    const double det = J[0][0] * J[1][1] - J[0][1] * J[1][0];
    if (std::abs(det) < 1e-12)
        throw Singular("projection Jacobian determinant " + std::to_string(det));
    frame_.newton_jac_inv = Mat2{{{J[1][1] / det, -J[0][1] / det},
                                  {-J[1][0] / det, J[0][0] / det}}};
}

const Frame& FrameCache::at(Vec2 xi) {
    if (!has_ || (xi - base_).norm() > refresh_factor_ * fam_->eps) rebuild(xi);
    return frame_;
}

void FrameCache::ensure_derivatives(bool with_second) {
    if (!has_) rebuild(base_);
    if (frame_.deriv && (!with_second || frame_.deriv->has_second)) return;
    frame_.deriv = linop::eigen_derivatives(*fam_, base_, frame_.eigen, fd_step_,
                                            with_second, eopt_);
    eigensolves_ += with_second ? 16 : 8;
}

void FrameCache::ensure_second_derivatives_of_state() {
    if (!has_) rebuild(base_);
    if (frame_.state.has_second) return;
    frame_.state = fam_->build(base_, fam_->mass0, /*with_second=*/true);
}

namespace {

// psi_i at xi in the frame gauge: base eigenfield plus optional first-order
// transport along xi - base.
SpectralCoeffs frame_psi(const FrameCache& cache, const Frame& fr, int i, Vec2 xi) {
    SpectralCoeffs psi = fr.eigen.psi_hat[i];
    if (cache.transport() && fr.deriv) {
        const Vec2 d = xi - cache.base();
        kernels::axpy(d.x, fr.deriv->dpsi[i][0].data(), psi.data(), psi.size());
        kernels::axpy(d.y, fr.deriv->dpsi[i][1].data(), psi.data(), psi.size());
    }
    return psi;
}

}  // namespace

FermiDecomposition project_to_manifold(FrameCache& cache, const Field& u,
                                       Vec2 xi_guess, const ProjectionOptions& opt) {
    const droplet::DropletFamily& fam = cache.family();
    const Transform& t = Transform::get(fam.grid);
    const Frame& fr = cache.at(xi_guess);
    if (cache.transport()) cache.ensure_derivatives(false);

    const SpectralCoeffs u_hat = t.forward(u);
    const double u_norm = spectral::norm_hm1(u_hat);

    Vec2 xi = xi_guess;
    double a = 0.0;
    SpectralCoeffs drop_hat;

    auto g_at = [&](Vec2 p, double* gnorm) -> Vec2 {
        drop_hat = t.forward(fam.sample_mass_corrected(p, fam.mass0, &a));
        Vec2 g;
        const SpectralCoeffs psi0 = frame_psi(cache, fr, 0, p);
        const SpectralCoeffs psi1 = frame_psi(cache, fr, 1, p);
        g.x = spectral::inner_hm1(u_hat, psi0) - spectral::inner_hm1(drop_hat, psi0);
        g.y = spectral::inner_hm1(u_hat, psi1) - spectral::inner_hm1(drop_hat, psi1);
        if (gnorm) *gnorm = std::max(std::abs(g.x), std::abs(g.y));
        return g;
    };

    double gn = 0.0;
    Vec2 g = g_at(xi, &gn);
    int it = 0;
    std::string trace;
    for (; it < opt.max_iter; ++it) {
        // residual scale: ||v|| of the current iterate
        SpectralCoeffs vh = u_hat;
        kernels::axpy(-1.0, drop_hat.data(), vh.data(), vh.size());
        const double vn = spectral::norm_hm1(vh);
        if (gn <= opt.tol_rel * std::max(vn, opt.tol_floor)) break;

        const Mat2& Ji = fr.newton_jac_inv;
        const Vec2 step{-(Ji[0][0] * g.x + Ji[0][1] * g.y),
                        -(Ji[1][0] * g.x + Ji[1][1] * g.y)};
        double lambda = 1.0;
        bool accepted = false;
        for (int half = 0; half < 5; ++half) {
            const Vec2 trial = xi + step * lambda;
            double gn_trial;
            const Vec2 g_trial = g_at(trial, &gn_trial);
            if (gn_trial < gn) {
                xi = trial;
                g = g_trial;
                gn = gn_trial;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        trace += "it" + std::to_string(it) + " |g|=" + std::to_string(gn) + "; ";
        if (!accepted)
            throw NewtonDiverged("projection stalled: " + trace);
    }
    if (it == opt.max_iter) throw NewtonDiverged("projection out of iterations: " + trace);

    FermiDecomposition fd;
    if (opt.polish_refresh && (xi - cache.base()).norm() > 1e-15) {
        // rebuild the eigenbasis at the recovered center and re-solve
        FrameCache fresh(fam, cache.eigen_options(), 0.0, false, cache.fd_step());
        ProjectionOptions o2 = opt;
        o2.polish_refresh = false;
        fd = project_to_manifold(fresh, u, xi, o2);
    } else {
        fd.xi = xi;
        // final v from the converged droplet coefficients
        fd.v_hat = u_hat;
        kernels::axpy(-1.0, drop_hat.data(), fd.v_hat.data(), fd.v_hat.size());
        fd.v = t.inverse(fd.v_hat);
        fd.v_hm1 = spectral::norm_hm1(fd.v_hat);
        fd.v_l2 = spectral::norm_l2(fd.v_hat);
        fd.newton_iterations = it;
        fd.g_norm = gn;
    }
    if (opt.tube_radius > 0 && fd.v_hm1 > opt.tube_radius)
        throw NotInTube("||v|| = " + std::to_string(fd.v_hm1) + " exceeds tube radius " +
                        std::to_string(opt.tube_radius) + " (u_norm " +
                        std::to_string(u_norm) + ")");
    return fd;
}

Mat2 assemble_A(FrameCache& cache, const FermiDecomposition& fd, Mat2* Z0_out, Mat2* Z1_out) {
    const Frame& fr = cache.current();
    const Transform& t = Transform::get(cache.family().grid);
    Mat2 Z0{}, Z1{};
    const SpectralCoeffs tan_hat_0 = t.forward(fr.state.tangent[0]);
    const SpectralCoeffs tan_hat_1 = t.forward(fr.state.tangent[1]);
    for (int k = 0; k < 2; ++k) {
        Z0[k][0] = spectral::inner_hm1(fr.eigen.psi_hat[k], tan_hat_0);
        Z0[k][1] = spectral::inner_hm1(fr.eigen.psi_hat[k], tan_hat_1);
    }
    const bool have_v = fd.v_hat.size() > 0 && fd.v_hm1 > 0;
    if (have_v) {
        cache.ensure_derivatives(false);
        for (int k = 0; k < 2; ++k)
            for (int j = 0; j < 2; ++j)
                Z1[k][j] = -spectral::inner_hm1(fd.v_hat, cache.current().deriv->dpsi[k][j]);
    }
    Mat2 A{};
    for (int k = 0; k < 2; ++k)
        for (int j = 0; j < 2; ++j) A[k][j] = Z0[k][j] + Z1[k][j];
    const double det = A[0][0] * A[1][1] - A[0][1] * A[1][0];
    if (std::abs(det) < 1e-12)
        throw Singular("A determinant " + std::to_string(det));
    if (Z0_out) *Z0_out = Z0;
    if (Z1_out) *Z1_out = Z1;
    return A;
}

std::array<SpectralCoeffs, 2> diffusion_fields(const Frame& frame, const Mat2& A_inv) {
    const Grid g = frame.eigen.psi_hat[0].grid;
    std::array<SpectralCoeffs, 2> sigma{SpectralCoeffs(g), SpectralCoeffs(g)};
    for (int r = 0; r < 2; ++r)
        for (std::size_t p = 0; p < g.size(); ++p)
            sigma[r].c[p] = A_inv[r][0] * frame.eigen.psi_hat[0].c[p] +
                            A_inv[r][1] * frame.eigen.psi_hat[1].c[p];
    return sigma;
}

ReducedCoefficients reduced_coefficients(FrameCache& cache, const FermiDecomposition& fd,
                                         const spde::NoiseSpec& noise, DriftMode mode) {
    ReducedCoefficients rc;
    rc.full_mode = (mode == DriftMode::full);
    rc.A = assemble_A(cache, fd, &rc.Z0, &rc.Z1);
    const double det = rc.A[0][0] * rc.A[1][1] - rc.A[0][1] * rc.A[1][0];
    rc.A_inv = Mat2{{{rc.A[1][1] / det, -rc.A[0][1] / det},
                     {-rc.A[1][0] / det, rc.A[0][0] / det}}};
    const Frame& fr = cache.current();
    rc.sigma_hat = diffusion_fields(fr, rc.A_inv);

    const droplet::DropletFamily& fam = cache.family();
    const Transform& t = Transform::get(fam.grid);
    const std::size_t n = fam.grid.size();

    // residual projection <psi_k, L(u~ + v)>_{H^-1}
    Field u = fr.state.field;
    if (fd.v.size() == n) kernels::axpy(1.0, fd.v.data(), u.data(), n);
    const SpectralCoeffs u_hat = t.forward(u);
    Field nl(fam.grid);
    kernels::double_well_prime(u.data(), nl.data(), n);
    const SpectralCoeffs nl_hat = t.forward(nl);
    const double eps = fam.eps;
    std::array<double, 2> rhs{0.0, 0.0};
    for (int k = 0; k < 2; ++k) {
        double s = 0.0;
        for (std::size_t p = 1; p < n; ++p) {
            const double mu = t.mu()[p];
            // <psi_k, L u>_{H^-1} = sum psi^ (-eps^2 mu u^ - nl^)
            s += fr.eigen.psi_hat[k].c[p] * (-eps * eps * mu * u_hat.c[p] - nl_hat.c[p]);
        }
        rhs[k] = s;
    }

    if (rc.full_mode && !noise.empty()) {
        cache.ensure_derivatives(true);
        cache.ensure_second_derivatives_of_state();
        const Frame& fr2 = cache.current();
        const auto& der = *fr2.deriv;

        Mat2 qss{};
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                qss[i][j] = spde::q_pairing(noise, rc.sigma_hat[i], rc.sigma_hat[j]);

        std::array<SpectralCoeffs, 2> tan_hat{t.forward(fr2.state.tangent[0]),
                                              t.forward(fr2.state.tangent[1])};
        std::array<std::array<SpectralCoeffs, 2>, 2> dd_hat;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                dd_hat[i][j] = t.forward(fr2.state.second_deriv(i, j));

        for (int k = 0; k < 2; ++k) {
            double ito = 0.0;
            for (int i = 0; i < 2; ++i) {
                for (int j = 0; j < 2; ++j) {
                    double bracket = 0.0;
                    if (fd.v_hat.size() == n)
                        bracket += 0.5 * spectral::inner_hm1(fd.v_hat, der.second(k, i, j));
                    bracket -= spectral::inner_hm1(der.dpsi[k][j], tan_hat[i]);
                    bracket -= 0.5 * spectral::inner_hm1(fr2.eigen.psi_hat[k], dd_hat[i][j]);
                    ito += bracket * qss[i][j];
                }
                ito += spde::q_pairing(noise, der.dpsi[k][i], rc.sigma_hat[i]);
            }
            rhs[k] += ito;
        }
    }

    rc.f = Vec2{rc.A_inv[0][0] * rhs[0] + rc.A_inv[0][1] * rhs[1],
                rc.A_inv[1][0] * rhs[0] + rc.A_inv[1][1] * rhs[1]};
    return rc;
}

Vec2 reduced_sde_step(const droplet::DropletFamily& fam, Vec2 xi,
                      const ReducedCoefficients& rc, double dt,
                      const SpectralCoeffs& dw) {
    Vec2 out = xi;
    out.x += rc.f.x * dt + spectral::inner_hm1(rc.sigma_hat[0], dw);
    out.y += rc.f.y * dt + spectral::inner_hm1(rc.sigma_hat[1], dw);
    const double bd = std::min(std::min(out.x, 1.0 - out.x), std::min(out.y, 1.0 - out.y));
    if (bd - fam.rho_phys < fam.delta)
        throw OutOfDomain("reduced step left the clearance region at (" +
                          std::to_string(out.x) + "," + std::to_string(out.y) + ")");
    return out;
}

}  // namespace droplab::fermi
