#pragma once

// Cosine-spectral machinery on the unit square: DCT-II/DCT-III transforms
// (FFTW backend), the Neumann Laplacian diagonalized by mu_{kl} =
// (pi k)^2 + (pi l)^2, Sobolev norms on the zero-mean subspace, and the
// Cahn-Hilliard free energy.
//
// Convention (asserted by tests): forward(f) returns coefficients of the
// L2-orthonormal cosine basis under the cell-center quadrature
// <f,g> = hx*hy*sum f*g, so Parseval holds exactly and coefficient (0,0)
// is the field mean.

#include <string>

#include "droplab/field.hpp"

namespace droplab::spectral {

// Shared per-grid transform plans and multiplier tables.  Instances are
// cached and immutable; execution is thread-safe on distinct arrays.
class Transform {
  public:
    static const Transform& get(Grid g);

    void forward(const Field& f, SpectralCoeffs& out) const;
    void inverse(const SpectralCoeffs& c, Field& out) const;
    SpectralCoeffs forward(const Field& f) const;
    Field inverse(const SpectralCoeffs& c) const;

    // mu_{kl}, 1/mu (0 at the zero mode), sqrt(mu), laid out like coefficients.
    const avector& mu() const { return mu_; }
    const avector& inv_mu() const { return inv_mu_; }
    const avector& sqrt_mu() const { return sqrt_mu_; }

    Grid grid() const { return grid_; }

  private:
    explicit Transform(Grid g);
    Transform(const Transform&) = delete;

    Grid grid_;
    avector fwd_scale_;   // REDFT10 output -> orthonormal coefficients
    avector inv_scale_;   // orthonormal coefficients -> REDFT01 input
    avector mu_, inv_mu_, sqrt_mu_;
    void* plan_fwd_ = nullptr;
    void* plan_inv_ = nullptr;
};

// ---- operators ----
Field laplacian(const Field& f);
// Solves -
//   -lap(g) = f with mean(g) = 0; requires |mean(f)| < 1e-10 * ||f||_L2.
Field inv_laplacian_zero_mean(const Field& f);
Field project_zero_mean(const Field& f);

// ---- functionals ----
double mass(const Field& f);
double mean(const Field& f);
double norm_l2(const Field& f);
double norm_hm1(const Field& f);      // zero-mean precondition as above
double norm_h1(const Field& f);       // H1 seminorm ||grad f||_L2
double norm_h2(const Field& f);       // ||lap f||_L2
double inner_l2(const Field& f, const Field& g);
double inner_hm1(const Field& f, const Field& g);
double energy(const Field& u, double eps);

// Coefficient-space variants used in hot loops.
double norm_l2(const SpectralCoeffs& c);
double norm_hm1(const SpectralCoeffs& c);
double norm_h1(const SpectralCoeffs& c);
double norm_h2(const SpectralCoeffs& c);
double inner_hm1(const SpectralCoeffs& a, const SpectralCoeffs& b);
double inner_l2(const SpectralCoeffs& a, const SpectralCoeffs& b);

// ---- serialization ----
void write_field_binary(const Field& f, const std::string& path);
Field read_field_binary(const std::string& path);
void write_field_csv(const Field& f, const std::string& path);

}  // namespace droplab::spectral
