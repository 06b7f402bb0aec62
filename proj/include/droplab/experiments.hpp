#pragma once

// Experiment drivers: Monte Carlo exit-time ensembles, the coupled
// SPDE-vs-reduced-SDE run, and the spectral / profile / norm-scaling sweeps.
// Each driver writes CSV + JSON outputs and a manifest under cfg.out_dir and
// returns its summary for in-process assertions.

#include <optional>
#include <string>
#include <vector>

#include "droplab/config.hpp"
#include "droplab/droplet.hpp"
#include "droplab/field.hpp"
#include "droplab/linearized.hpp"
#include "droplab/spde.hpp"

namespace droplab::harness {

// Exact binomial (Clopper-Pearson) two-sided interval.
struct Interval {
    double lo = 0.0, hi = 1.0;
};
Interval clopper_pearson(int successes, int trials, double confidence = 0.95);

// Smooth random zero-mean field, H^-1-orthogonal to psi_1, psi_2, scaled to
// a prescribed H^-1 norm; deterministic in (seed, path).
Field random_transverse_field(const droplet::DropletState& d,
                              const linop::EigenStructure& es, std::uint64_t seed,
                              std::uint32_t path, double target_hm1);

struct PathOutcome {
    int path = 0;
    double exit_time = -1.0;  // -1: survived to the horizon
    std::string reason = "none";
    double max_hm1 = 0.0;
    double final_hm1 = 0.0;
    double final_l2 = 0.0;
    double mass_drift = 0.0;
    Vec2 final_xi;
};

struct ExitSummary {
    int paths = 0;
    int exits = 0;
    int diverged = 0;
    double exit_fraction = 0.0;
    Interval ci;
    double horizon = 0.0;
    double tube_radius = 0.0;
    double l2_radius = -1.0;
    double eta0 = 0.0, eta1 = 0.0, eta2 = 0.0;
    std::vector<PathOutcome> outcomes;
};

ExitSummary run_exit_time(const ExperimentConfig& cfg);

struct CouplingSeedResult {
    int seed_index = 0;
    double sup_dxi_vfed = 0.0;   // sup_t |xi_full - xi_reduced|
    double sup_dxi_v0 = 0.0;
    double displacement = 0.0;   // sup_t |xi_full - xi(0)|
    double displacement_scaled = 0.0;  // same path, noise * scale_factor
    double ratio_vfed = 0.0;
    double ratio_v0 = 0.0;
};

struct CouplingSummary {
    std::vector<CouplingSeedResult> seeds;
    double max_ratio_vfed = 0.0;
    double max_ratio_v0 = 0.0;
    double rms_displacement = 0.0;
    double rms_displacement_scaled = 0.0;
    double scale_factor = 1.0;
    double eta0 = 0.0;
};

CouplingSummary run_coupling(const ExperimentConfig& cfg);

struct SpectralRow {
    double eps = 0.0;
    double lambda1 = 0.0, lambda2 = 0.0, lambda3 = 0.0;
    double mu1 = 0.0, mu2 = 0.0, mu3 = 0.0;
    double dbar = 0.0;
    double eigen_residual = 0.0;
};

struct SpectralSweepResult {
    std::vector<SpectralRow> rows;
    double lambda3_over_eps_spread = 0.0;  // max/min over the sweep
    double mu3_over_eps2_min = 0.0;
    double mu3_over_eps2_spread = 0.0;
};

SpectralSweepResult run_spectral_sweep(const ExperimentConfig& cfg);

struct ProfileRow {
    double rho = 0.0, sigma = 0.0, sigma_rho = 0.0, alpha = 0.0, nu = 0.0;
    double residual = 0.0;
    double tail_slope = 0.0;      // fitted decay rate of alpha - U
    double tail_slope_err = 0.0;  // |slope - sqrt(2)| / sqrt(2)
};

struct ProfileSweepResult {
    std::vector<ProfileRow> rows;
    double fit_c1 = 0.0, fit_c2 = 0.0;
    double fit_rel_residual = 0.0;  // sigma ~ c1/rho + c2/rho^2
};

ProfileSweepResult run_profile_sweep(const ExperimentConfig& cfg);

struct NormScalingRow {
    double eps = 0.0;
    double tangent_hm1 = 0.0;    // max_j ||u~_j||_{H^-1}
    double tangent_l2 = 0.0;     // max_j ||u~_j||_{L2} sqrt(eps)
    double second_l2 = 0.0;      // max_ij ||u~_ij||_{L2} eps^{3/2}
    double second_hm1 = 0.0;     // max_ij ||u~_ij||_{H^-1} sqrt(eps)
};

struct NormScalingResult {
    std::vector<NormScalingRow> rows;
    // max/min - 1 across the sweep, per column
    double var_tangent_hm1 = 0.0, var_tangent_l2 = 0.0;
    double var_second_l2 = 0.0, var_second_hm1 = 0.0;
};

NormScalingResult run_norm_scaling(const ExperimentConfig& cfg);

struct SimulateResult {
    double final_t = 0.0;
    std::uint64_t final_step = 0;
    double final_mass = 0.0;
    double final_energy = 0.0;
    std::string checkpoint_path;
};

SimulateResult run_simulate(const ExperimentConfig& cfg);

// Shared helpers.
spde::NoiseSpec make_noise(const ExperimentConfig& cfg, double eps, Grid g);
double field_energy_from_state(const spde::State& s, double eps);

}  // namespace droplab::harness
