#pragma once

// Radially symmetric stationary states of the rescaled problem
//   U'' + U'/r = F'(U) + sigma   on [0, r_max],  U'(0) = U'(r_max) = 0,
// with F(u) = (u^2-1)^2/4.  For a prescribed droplet radius rho (the zero
// crossing of U) the chemical-potential constant sigma(rho) is found by an
// outer bracketing iteration around an inner damped-Newton BVP solve on a
// uniform grid.  The solved table carries U, U_r and the family derivative
// U_rho, each wrapped in a clamped cubic spline for off-grid sampling.

#include <string>
#include <vector>

#include "droplab/field.hpp"

namespace droplab::radial {

// Closed-form planar kink U(s) = tanh(s/sqrt(2)) solving U'' = F'(U).
struct Kink {
    static double value(double s) { return std::tanh(s / std::sqrt(2.0)); }
    static double deriv(double s) {
        const double c = std::cosh(s / std::sqrt(2.0));
        return 1.0 / (std::sqrt(2.0) * c * c);
    }
    static double second(double s) {
        const double t = std::tanh(s / std::sqrt(2.0));
        const double c = std::cosh(s / std::sqrt(2.0));
        return -t / (c * c);
    }
};

// Natural cubic spline on a uniform grid with clamped end slopes.
class Spline {
  public:
    Spline() = default;
    Spline(double x0, double dx, const std::vector<double>& y,
           double slope_left, double slope_right);
    double operator()(double x) const;
    double deriv(double x) const;
    double second(double x) const;

  private:
    double x0_ = 0.0, dx_ = 1.0;
    std::vector<double> y_, m_;  // values and second derivatives at nodes
};

struct RadialProfile {
    double rho = 0.0;       // droplet radius (zero crossing of U)
    double sigma = 0.0;     // chemical-potential constant
    double sigma_prime = 0.0;  // d sigma / d rho
    double alpha = 0.0;     // far-field value, root of F'(a) + sigma = 0 near 1
    double nu = 0.0;        // tail decay rate sqrt(F''(alpha))
    double r_max = 0.0;
    double residual = 0.0;  // max_i |lap_r U - F'(U) - sigma| on the grid
    std::vector<double> r, U, Ur, Urho;

    Spline u_spline, urho_spline;

    // Samples clamp to alpha beyond r_max (the tail is below solver
    // tolerance there).
    double value(double rr) const;
    double deriv(double rr) const;
    double second(double rr) const;
    double rho_deriv(double rr) const;
};

struct RadialOptions {
    int n_r = 4096;
    // Newton residual tolerance (sup norm).  The attainable floor is about
    // eps_mach / dr^2 from cancellation in the stencil, so 1e-12 is not
    // reachable on fine grids.
    double tol = 1e-9;
    int max_newton = 60;
};

// Solves the profile for a given radius.  Throws NoBracket when no sigma
// in the admissible window produces the requested radius (rho below the
// empirical existence threshold, or r_max too small), NoConvergence with an
// iteration trace when the inner Newton stalls.
RadialProfile solve_radial_profile(double rho, double r_max, double tol,
                                   const RadialOptions& opt = {});

// Smallest radius (within resolution dr) for which the outer iteration can
// still bracket sigma; exposed for reporting.
double empirical_min_radius(double r_max, double dr);

// CSV (r, U, U_r) plus a JSON sidecar with rho, sigma, alpha, nu, residual.
void write_profile_csv(const RadialProfile& p, const std::string& csv_path,
                       const std::string& json_path);

}  // namespace droplab::radial
