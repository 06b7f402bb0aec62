#pragma once

// Declarative experiment configuration.  Files are TOML (the flat subset:
// [section] headers, key = value, numbers/strings/booleans/arrays, #
// comments) or JSON, chosen by extension; both lower into the same struct.
// Every run writes a manifest carrying the fully resolved configuration, the
// RNG keying scheme and the output list, so any output is reconstructible
// from its manifest alone.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace droplab::harness {

enum class ExperimentKind {
    exit_time,
    coupling,
    spectral_sweep,
    profile_sweep,
    norm_scaling,
    simulate,
};

std::string kind_name(ExperimentKind k);
ExperimentKind kind_from_name(const std::string& s);

struct ModelConfig {
    double eps = 0.06;
    std::vector<double> eps_list;  // sweeps; falls back to {eps}
    double rho_phys = 0.2;
    double delta = 0.1;
    int grid_n = 128;
    std::array<double, 2> xi0{0.5, 0.5};

    std::vector<double> eps_values() const {
        return eps_list.empty() ? std::vector<double>{eps} : eps_list;
    }
};

struct NoiseConfig {
    double mu_cut = 1000.0;
    double decay = 2.0;             // alpha_m = A mu_m^-decay
    std::string calibrate = "eta0"; // eta0 | eta2
    double exponent = 9.5;          // target = prefactor * eps^exponent
    double prefactor = 1.0;
};

struct SdeConfig {
    double dt = 2e-3;
    double kappa = 2.0;
    double amplitude_cap = 10.0;
};

struct ExitTimeConfig {
    int paths = 50;
    double horizon_exponent = 2.0;  // T = min(eps^-exponent, horizon_cap)
    double horizon_cap = 500.0;
    double tube_c0 = 4.0;           // H^-1 radius = tube_c0 * eps^tube_m
    double tube_m = 4.0;
    double l2_radius_k = -1.0;      // >= 0 enables ||v||_L2 > eps^(k+1) exit
    double init_nu = 2.0;           // ||v(0)||_{H^-1} = init_nu * eps^4 (< tube_c0)
    int diag_cadence = 10;
    int record_stride = 0;          // 0: auto-thin to ~2000 rows per path
    bool write_paths = true;
    bool projection_transport = false;
};

struct CouplingConfig {
    int seeds = 10;
    double horizon = 50.0;
    std::string drift_mode = "full";  // full | leading
    double init_nu = 2.0;
    int diag_cadence = 10;
    double scale_factor = 10.0;       // second pass at eta0 * scale_factor
    bool projection_transport = true;
};

struct SweepConfig {
    std::vector<double> rho_list{10.0, 20.0, 40.0};
    double r_max_pad = 42.0;
    int eigen_count = 3;
    double eigen_tol = 1e-5;
};

struct SimulateConfig {
    double horizon = 10.0;
    int record_stride = 10;
    int checkpoint_every = 0;  // steps; 0 = only final
    std::string resume;        // checkpoint JSON path
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::exit_time;
    std::uint64_t seed = 1;
    int threads = 0;  // 0 = hardware concurrency
    std::string out_dir = "out";

    ModelConfig model;
    NoiseConfig noise;
    SdeConfig sde;
    ExitTimeConfig exit_time;
    CouplingConfig coupling;
    SweepConfig sweep;
    SimulateConfig simulate;

    nlohmann::json to_json() const;
    static ExperimentConfig from_json(const nlohmann::json& j);
};

// Parses .toml (subset) or .json by extension.
ExperimentConfig load_config(const std::string& path);
nlohmann::json parse_toml_subset(const std::string& text);

// manifest.json beside the outputs: resolved config, code version, RNG
// scheme, output list.  Content is fully deterministic.
void write_manifest(const ExperimentConfig& cfg, const std::string& dir,
                    const std::vector<std::string>& outputs);

}  // namespace droplab::harness
