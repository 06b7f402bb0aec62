#pragma once

// Linearized operators around a droplet state and their leading eigenpairs.
//
// Convention: L^xi v = lap(-eps^2 lap v + F''(u~) v) on H^-1_0 with the
// eigenvalue problem L^xi psi = -lambda psi, so lambda_1 <= lambda_2 are the
// two exponentially small translation values and lambda_3 > 0 is the gap.
// The solver works on the L2-symmetrized form
//   S = (-lap)^{1/2} (eps^2 (-lap) + F''(u~)) (-lap)^{1/2},   S phi = lambda phi,
// whose eigenpairs map exactly to the H^-1 pairs via psi = (-lap)^{1/2} phi;
// the quadratic-form identity <L v, v>_{H^-1} = <A v, v>_{L2} with the
// mass-conserving Allen-Cahn operator A is asserted by tests.

#include <array>
#include <memory>
#include <vector>

#include "droplab/droplet.hpp"
#include "droplab/field.hpp"

namespace droplab::linop {

// Real-space operator applications (diagnostics and quadratic forms).
struct Linearization {
    Grid grid;
    double eps = 0.0;
    Field fpp;  // F''(u~) on the grid

    static Linearization around(const droplet::DropletState& d);

    Field apply_cahn_hilliard(const Field& v) const;  // lap(-eps^2 lap v + F'' v)
    Field apply_allen_cahn(const Field& v) const;     // eps^2 lap v - F'' v - mean(F'' v)
};

// Matrix-free symmetric operator in cosine-coefficient space (zero-mean
// subspace; the (0,0) entry is annihilated).
class CoeffOp {
  public:
    virtual ~CoeffOp() = default;
    virtual void apply(const avector& in, avector& out) const = 0;
    virtual const avector& precond_diag() const = 0;
    virtual Grid grid() const = 0;
    // Approximate near-null directions (the droplet tangents in the
    // operator's own coordinates).  The inner CG deflates these; without the
    // deflation the preconditioned system is 1e5-ill-conditioned and the
    // shift-inverted Lanczos cannot see the translation pair.
    virtual const std::vector<avector>& near_null_basis() const = 0;
};

std::unique_ptr<CoeffOp> make_symmetrized_ch(const droplet::DropletState& d);
std::unique_ptr<CoeffOp> make_mass_conserving_ac(const droplet::DropletState& d);

struct EigenPair {
    double lambda = 0.0;
    double residual = 0.0;  // ||S phi - lambda phi||_L2, phi unit
    avector phi;            // coefficient-space, L2-orthonormal
};

struct EigenOptions {
    double tol = 1e-5;        // eigen residual tolerance
    double shift = 0.0;       // 0: pick 0.5*spectral-gap scale automatically
    int max_lanczos = 120;
    int cg_max = 600;
    double cg_tol = 1e-12;
};

// Smallest `count` eigenvalues by sequential shift-invert Lanczos with
// deflation (the lowest two are numerically degenerate, so each pair is
// extracted on the orthogonal complement of the previous ones).
std::vector<EigenPair> smallest_eigenpairs(const CoeffOp& op, int count,
                                           const EigenOptions& opt);

struct EigenStructure {
    double eps = 0.0;
    std::vector<double> lambda;          // ascending
    std::vector<SpectralCoeffs> psi_hat; // H^-1-orthonormal eigenfields
    std::vector<Field> psi;
    double max_residual = 0.0;

    double dbar = -1.0;                  // subspace distance d(E, F)
    std::array<std::array<double, 2>, 2> a{};   // least-squares coefficients
    std::array<std::array<double, 2>, 2> B{};   // B_jk = <u~_j, psi_k>
    std::array<std::array<double, 2>, 2> Q{};   // rotation with <u~_1, psibar_2> = 0
    std::vector<SpectralCoeffs> psi_bar_hat;
};

// count >= 3; computes pairs, alignment and the coefficient matrices.
EigenStructure leading_eigenpairs(const droplet::DropletState& d, int count,
                                  const EigenOptions& opt = {});

std::vector<double> allen_cahn_eigenvalues(const droplet::DropletState& d, int count,
                                           const EigenOptions& opt = {});

// One-sided subspace distance between E = span(normalized tangents) and
// F = span(psi_1, psi_2) from principal angles in H^-1.
double tangent_alignment(const EigenStructure& es, const droplet::DropletState& d);

// Distance of a field's direction to span(psi_1, psi_2) in H^-1 (used by the
// random-subspace control test).
double subspace_distance(const std::array<SpectralCoeffs, 2>& span_hat,
                         const std::array<SpectralCoeffs, 2>& against_hat);

// Fills es.a, es.B, es.Q, es.psi_bar_hat; throws IllConditioned when the
// tangent Gram matrix is numerically singular.
void coefficient_matrices(EigenStructure& es, const droplet::DropletState& d);

// Central finite differences of the eigenbasis in xi (step h), with
// eigenvector gauge fixed by maximal-overlap (Procrustes) matching against
// the base structure.
struct EigenDerivatives {
    double h = 0.0;
    // dpsi[i][j] = d psi_i / d xi_j
    std::array<std::array<SpectralCoeffs, 2>, 2> dpsi;
    bool has_second = false;
    // d2psi[i][jk] with jk in {00, 01, 11}
    std::array<std::array<SpectralCoeffs, 3>, 2> d2psi;

    const SpectralCoeffs& second(int i, int j, int k) const {
        return d2psi[i][(j == 0 && k == 0) ? 0 : (j == 1 && k == 1) ? 2 : 1];
    }
};

EigenDerivatives eigen_derivatives(const droplet::DropletFamily& fam, Vec2 xi,
                                   const EigenStructure& base, double h,
                                   bool with_second, const EigenOptions& opt = {});

// Orthogonal Procrustes alignment of a 2-column basis onto a base (gauge
// fixing for eigenvector sign/rotation freedom); columns are coefficient
// vectors, inner product plain L2.
void align_pair_to_base(std::array<SpectralCoeffs, 2>& pair,
                        const std::array<SpectralCoeffs, 2>& base);

}  // namespace droplab::linop
