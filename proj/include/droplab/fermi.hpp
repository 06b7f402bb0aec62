#pragma once

// Fermi coordinates u = u~^xi + v with <v, psi_i^xi>_{H^-1} = 0, and the
// exact reduced SDE for the center:
//   d xi_k = f_k dt + <sigma_k, dW>,   sigma_r = sum_i A^-1_ri psi_i,
//   A_kj = <psi_k, u~_j> - <v, psi_{k,j}>.
// The drift carries the residual projection plus the Ito terms built from
// Q-pairings of the eigenbasis derivatives.

#include <array>
#include <optional>

#include "droplab/droplet.hpp"
#include "droplab/linearized.hpp"
#include "droplab/spde.hpp"

namespace droplab::fermi {

using Mat2 = std::array<std::array<double, 2>, 2>;

// Droplet + eigenstructure (+ lazily, eigenbasis derivatives) at one center.
struct Frame {
    droplet::DropletState state;
    linop::EigenStructure eigen;
    std::optional<linop::EigenDerivatives> deriv;
    Mat2 newton_jac_inv{};  // inverse FD Jacobian of the orthogonality system
};

// Frame reuse policy: eigenpairs are recomputed when the center moves more
// than refresh_factor * eps from the frame base; in between the basis is
// reused, optionally with first-order transport psi^xi ~ psi + dpsi.(xi-base).
class FrameCache {
  public:
    FrameCache(const droplet::DropletFamily& fam, linop::EigenOptions eopt = {},
               double refresh_factor = 0.1, bool transport = true, double fd_step = 1e-3);

    const Frame& at(Vec2 xi);
    const Frame& current() const { return frame_; }
    Vec2 base() const { return base_; }
    bool transport() const { return transport_; }
    double fd_step() const { return fd_step_; }
    const linop::EigenOptions& eigen_options() const { return eopt_; }
    const droplet::DropletFamily& family() const { return *fam_; }
    void ensure_derivatives(bool with_second);
    void ensure_second_derivatives_of_state();
    int eigensolve_count() const { return eigensolves_; }

  private:
    void rebuild(Vec2 xi);

    const droplet::DropletFamily* fam_;
    linop::EigenOptions eopt_;
    double refresh_factor_;
    bool transport_;
    double fd_step_;
    Frame frame_;
    Vec2 base_;
    bool has_ = false;
    int eigensolves_ = 0;
};

struct FermiDecomposition {
    Vec2 xi;
    Field v;
    SpectralCoeffs v_hat;
    double v_hm1 = 0.0;
    double v_l2 = 0.0;
    int newton_iterations = 0;
    double g_norm = 0.0;  // final orthogonality residual (H^-1 pairings)
};

struct ProjectionOptions {
    double tol_rel = 1e-10;   // |g| <= tol_rel * max(||v||, floor)
    double tol_floor = 1e-14;
    int max_iter = 30;
    double jac_step = 1e-6;           // FD step for the 2x2 Jacobian
    double tube_radius = -1.0;        // >0: a-posteriori NotInTube check
    bool polish_refresh = false;      // rebuild eigenbasis at the found center
};

// Newton iteration on g_i(xi) = <u - u~^xi, psi_i^xi>_{H^-1} = 0 with a
// frozen FD Jacobian from the frame base and step-halving damping.
FermiDecomposition project_to_manifold(FrameCache& cache, const Field& u,
                                       Vec2 xi_guess, const ProjectionOptions& opt = {});

struct ReducedCoefficients {
    Mat2 A{}, A_inv{}, Z0{}, Z1{};
    std::array<SpectralCoeffs, 2> sigma_hat;
    Vec2 f;
    bool full_mode = true;
};

enum class DriftMode { full, leading };

// A = Z0 + Z1(v); throws Singular when |det A| < 1e-12.  Requires the
// frame's eigen-derivatives (Z1) unless v is empty.
Mat2 assemble_A(FrameCache& cache, const FermiDecomposition& fd, Mat2* Z0 = nullptr,
                Mat2* Z1 = nullptr);

// sigma_r = sum_i A^-1_ri psi_i; the defining relation sum_j A_kj sigma_j =
// psi_k holds by construction.
std::array<SpectralCoeffs, 2> diffusion_fields(const Frame& frame, const Mat2& A_inv);

// Both coefficient sets at once; drift per (def of f): leading keeps only
// the residual projection line.
ReducedCoefficients reduced_coefficients(FrameCache& cache, const FermiDecomposition& fd,
                                         const spde::NoiseSpec& noise, DriftMode mode);

// Euler-Maruyama step; throws OutOfDomain when the new center violates the
// clearance margin.
Vec2 reduced_sde_step(const droplet::DropletFamily& fam, Vec2 xi,
                      const ReducedCoefficients& rc, double dt,
                      const SpectralCoeffs& dw);

}  // namespace droplab::fermi
