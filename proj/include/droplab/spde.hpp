#pragma once

// Q-Wiener sampling and the semi-implicit spectral integrator for
//   du = -lap(eps^2 lap u - F'(u)) dt + dW
// with homogeneous Neumann conditions built into the cosine basis.
//
// Noise basis: e_m = sqrt(mu_m) phi_m with phi_m the L2-orthonormal cosine
// modes, so ||e_m||_{H^-1} = 1, ||e_m||_{L2}^2 = mu_m, and the strengths are
// eta0 = sum alpha^2, eta1 = max alpha^2, eta2 = sum alpha^2 mu.

#include <cstdint>
#include <vector>

#include "droplab/field.hpp"
#include "droplab/rng.hpp"

namespace droplab::spde {

struct NoiseSpec {
    struct Mode {
        int k = 0, l = 0;
        std::size_t idx = 0;  // coefficient-array index l*nx + k
        double mu = 0.0;
    };
    Grid grid;
    std::vector<Mode> modes;    // never contains (0,0)
    std::vector<double> alpha;  // H^-1-basis amplitudes
    double eta0 = 0.0, eta1 = 0.0, eta2 = 0.0;

    bool empty() const { return modes.empty(); }
    void recompute_strengths();
    void scale(double factor);  // alpha *= factor (eta0, eta1 by factor^2)

    // All modes with 0 < mu <= mu_cut, alpha = A mu^{-decay}, A calibrated so
    // eta0 (resp. eta2) hits the target.
    static NoiseSpec power_law(Grid g, double mu_cut, double decay, double eta0_target);
    static NoiseSpec power_law_eta2(Grid g, double mu_cut, double decay, double eta2_target);
};

// Increment coefficients sum_m alpha_m sqrt(dt) N_m e_m for one step; the
// normals come from the counter-based stream, so any (step, mode) pair is
// reproducible in isolation.
void sample_increment(const NoiseSpec& ns, double dt, const rng::NormalStream& st,
                      std::uint64_t step, SpectralCoeffs& dw);
SpectralCoeffs sample_increment(const NoiseSpec& ns, double dt,
                                const rng::NormalStream& st, std::uint64_t step);

// <Q a, b>_{H^-1} = sum_m alpha_m^2 <a, e_m><b, e_m> for psi-style
// coefficient vectors.
double q_pairing(const NoiseSpec& ns, const SpectralCoeffs& a, const SpectralCoeffs& b);

// Q f in H^-1 (coefficientwise multiplication by alpha_m^2 on the noise modes).
SpectralCoeffs q_apply(const NoiseSpec& ns, const SpectralCoeffs& f);

struct StepperConfig {
    double eps = 0.04;
    double dt = 1e-3;
    double kappa = 2.0;          // stabilization shift, implicit
    double amplitude_cap = 10.0; // |u| beyond this raises Diverged
};

struct State {
    Field u;
    SpectralCoeffs u_hat;
    double t = 0.0;
    std::uint64_t step = 0;

    static State from_field(const Field& f);
};

// One first-order semi-implicit step.  The linear part
// (I + dt (eps^2 lap^2 - kappa lap)) is inverted diagonally in cosine space;
// the nonlinearity enters as F'(u) - kappa u evaluated at the current state.
// Modewise update:
//   u+ = [ (1 + dt kappa mu) u - dt mu F'(u)^ + dW ] / (1 + dt(eps^2 mu^2 + kappa mu)).
// Stability: the droplet linearization has nonpositive spectrum up to
// exponentially small terms, so the scheme is stable for any dt; accuracy
// wants dt well below the slowest transverse relaxation time 1/lambda_3,
// i.e. dt <= dt_max ~ 0.1/lambda_3 ~ O(eps^-1) -- far above the dt used here.
class Stepper {
  public:
    Stepper(Grid g, const StepperConfig& cfg);

    void step(State& s, const SpectralCoeffs* dw) const;
    const StepperConfig& config() const { return cfg_; }

  private:
    Grid grid_;
    StepperConfig cfg_;
    avector c_keep_, c_nl_, c_noise_;  // (1+dt kappa mu)/den, dt mu/den, 1/den
    mutable Field nl_;
    mutable SpectralCoeffs nl_hat_;
};

// ||lap(eps^2 lap u - F'(u))||_{H^-1} after zero-mean projection.
double residual(const Field& u, double eps);

// <L^xi v + N(u~, v), v>_{H^-1} evaluated by quadrature:
//   -(eps^2 ||grad v||^2 + int F''(u~) v^2) - int (3 u~ v^3 + v^4).
double nonlinearity_pairing(const Field& droplet_field, double eps, const Field& v);

// <N(u~,v), v>_{H^-1} alone (cubic + quartic part).
double cubic_pairing(const Field& droplet_field, const Field& v);

}  // namespace droplab::spde
