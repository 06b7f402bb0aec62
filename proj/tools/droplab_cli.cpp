// droplab command line: droplet construction, spectra, Fermi projection,
// SPDE simulation and the Monte Carlo experiment drivers.
//
// Exit codes: 0 success, 1 numerical failure (diagnostics on stderr),
// 2 usage error.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>

#include "droplab/config.hpp"
#include "droplab/errors.hpp"
#include "droplab/experiments.hpp"
#include "droplab/fermi.hpp"
#include "droplab/kernels.hpp"
#include "droplab/linearized.hpp"
#include "droplab/spectral.hpp"

using namespace droplab;
using harness::ExperimentConfig;
using harness::ExperimentKind;

namespace {

struct GlobalOpts {
    std::string config;
    std::string out_dir;
    long long seed = -1;
    int threads = -1;
};

ExperimentConfig resolve(const GlobalOpts& g, ExperimentKind kind) {
    ExperimentConfig cfg;
    if (!g.config.empty()) cfg = harness::load_config(g.config);
    cfg.kind = kind;
    if (g.seed >= 0) cfg.seed = static_cast<std::uint64_t>(g.seed);
    if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
    if (g.threads >= 0) cfg.threads = g.threads;
    return cfg;
}

void add_globals(CLI::App* app, GlobalOpts& g) {
    app->add_option("--config", g.config, "configuration file (.toml subset or .json)");
    app->add_option("--seed", g.seed, "override the RNG seed");
    app->add_option("--out-dir", g.out_dir, "override the output directory");
    app->add_option("--threads", g.threads, "worker threads (0 = hardware)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"droplab: droplet dynamics laboratory for the stochastic "
                 "Cahn-Hilliard equation"};
    app.require_subcommand(1);
    GlobalOpts g;

    auto* c_profile = app.add_subcommand("profile", "solve radial droplet profiles");
    add_globals(c_profile, g);
    std::vector<double> rho_list;
    c_profile->add_option("--rho", rho_list, "radii to solve (overrides config)");

    auto* c_droplet = app.add_subcommand("droplet", "build a droplet state");
    add_globals(c_droplet, g);
    std::vector<double> xi_opt{0.5, 0.5};
    c_droplet->add_option("--xi", xi_opt, "droplet center")->expected(2);

    auto* c_spectrum = app.add_subcommand("spectrum", "leading eigenpairs at one center");
    add_globals(c_spectrum, g);
    bool spectrum_sweep = false;
    c_spectrum->add_flag("--sweep", spectrum_sweep, "run the configured eps sweep");

    auto* c_project = app.add_subcommand("project", "Fermi projection of a stored field");
    add_globals(c_project, g);
    std::string field_path;
    c_project->add_option("field", field_path, "binary field container")->required();
    std::vector<double> guess{0.5, 0.5};
    c_project->add_option("--guess", guess, "initial center guess")->expected(2);

    auto* c_simulate = app.add_subcommand("simulate", "integrate one SPDE path");
    add_globals(c_simulate, g);

    auto* c_exit = app.add_subcommand("exit-time", "Monte Carlo first-exit ensemble");
    add_globals(c_exit, g);

    auto* c_coupling = app.add_subcommand("coupling", "shared-noise SPDE vs reduced SDE");
    add_globals(c_coupling, g);

    auto* c_sweep = app.add_subcommand("sweep", "spectral / profile / norm-scaling tables");
    add_globals(c_sweep, g);
    std::string sweep_kind = "spectral";
    c_sweep->add_option("--kind", sweep_kind, "spectral | profile | norms");

    auto* c_plot = app.add_subcommand("plot-data", "convert binary outputs to CSV");
    add_globals(c_plot, g);
    std::string plot_in, plot_out;
    c_plot->add_option("input", plot_in, "binary field file")->required();
    c_plot->add_option("-o,--output", plot_out, "CSV destination");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(c_profile)) {
            ExperimentConfig cfg = resolve(g, ExperimentKind::profile_sweep);
            if (!rho_list.empty()) cfg.sweep.rho_list = rho_list;
            auto R = harness::run_profile_sweep(cfg);
            for (const auto& r : R.rows)
                std::printf("rho=%g sigma=%.10g sigma*rho=%.6g alpha=%.8g nu=%.6g "
                            "residual=%.3g tail_slope=%.5g\n",
                            r.rho, r.sigma, r.sigma_rho, r.alpha, r.nu, r.residual,
                            r.tail_slope);
            std::printf("fit sigma ~ %.6g/rho + %.6g/rho^2, rel residual %.3g\n", R.fit_c1,
                        R.fit_c2, R.fit_rel_residual);
        } else if (app.got_subcommand(c_droplet)) {
            ExperimentConfig cfg = resolve(g, ExperimentKind::simulate);
            const Grid grid = Grid::unit_square(cfg.model.grid_n);
            auto fam = droplet::DropletFamily::create(
                grid, cfg.model.eps, cfg.model.rho_phys, cfg.model.delta,
                {cfg.model.xi0[0], cfg.model.xi0[1]});
            const auto d = fam.build({xi_opt[0], xi_opt[1]});
            std::filesystem::create_directories(cfg.out_dir);
            spectral::write_field_binary(d.field, cfg.out_dir + "/droplet.bin");
            std::printf("droplet at (%g,%g): a=%.6e mass=%.12g clearance=%.4g "
                        "rho_resc=%.4g -> %s/droplet.bin\n",
                        d.xi.x, d.xi.y, d.a, d.mass, d.clearance, d.rho_resc,
                        cfg.out_dir.c_str());
        } else if (app.got_subcommand(c_spectrum)) {
            ExperimentConfig cfg = resolve(g, ExperimentKind::spectral_sweep);
            if (!spectrum_sweep) cfg.model.eps_list = {cfg.model.eps};
            auto R = harness::run_spectral_sweep(cfg);
            for (const auto& r : R.rows)
                std::printf("eps=%g lambda=(%.3e, %.3e, %.6g) mu3=%.6g dbar=%.3e\n", r.eps,
                            r.lambda1, r.lambda2, r.lambda3, r.mu3, r.dbar);
        } else if (app.got_subcommand(c_project)) {
            ExperimentConfig cfg = resolve(g, ExperimentKind::simulate);
            const Field u = spectral::read_field_binary(field_path);
            auto fam = droplet::DropletFamily::create(
                u.grid, cfg.model.eps, cfg.model.rho_phys, cfg.model.delta,
                {cfg.model.xi0[0], cfg.model.xi0[1]});
            fermi::FrameCache cache(fam);
            fermi::ProjectionOptions popt;
            popt.polish_refresh = true;
            const auto fd = project_to_manifold(cache, u, {guess[0], guess[1]}, popt);
            std::printf("xi = (%.12g, %.12g)  ||v||_Hm1 = %.6e  ||v||_L2 = %.6e  "
                        "iterations = %d  |g| = %.3e\n",
                        fd.xi.x, fd.xi.y, fd.v_hm1, fd.v_l2, fd.newton_iterations,
                        fd.g_norm);
        } else if (app.got_subcommand(c_simulate)) {
            ExperimentConfig cfg = resolve(g, ExperimentKind::simulate);
            auto R = harness::run_simulate(cfg);
            std::printf("simulate: t=%g steps=%llu mass=%.12g energy=%.10g checkpoint=%s\n",
                        R.final_t, static_cast<unsigned long long>(R.final_step),
                        R.final_mass, R.final_energy, R.checkpoint_path.c_str());
        } else if (app.got_subcommand(c_exit)) {
            ExperimentConfig cfg = resolve(g, ExperimentKind::exit_time);
            auto S = harness::run_exit_time(cfg);
            std::printf("exit-time: %d/%d exits (fraction %.3g, 95%% CI [%.3g, %.3g]) "
                        "horizon %g tube %.3e eta0 %.3e\n",
                        S.exits, S.paths, S.exit_fraction, S.ci.lo, S.ci.hi, S.horizon,
                        S.tube_radius, S.eta0);
        } else if (app.got_subcommand(c_coupling)) {
            ExperimentConfig cfg = resolve(g, ExperimentKind::coupling);
            auto S = harness::run_coupling(cfg);
            std::printf("coupling: max ratio (v-fed) %.3g, (v=0) %.3g; rms displacement "
                        "%.3e -> %.3e under x%g noise (expect x%.3g)\n",
                        S.max_ratio_vfed, S.max_ratio_v0, S.rms_displacement,
                        S.rms_displacement_scaled, S.scale_factor,
                        std::sqrt(S.scale_factor));
        } else if (app.got_subcommand(c_sweep)) {
            if (sweep_kind == "spectral") {
                harness::run_spectral_sweep(resolve(g, ExperimentKind::spectral_sweep));
            } else if (sweep_kind == "profile") {
                harness::run_profile_sweep(resolve(g, ExperimentKind::profile_sweep));
            } else if (sweep_kind == "norms") {
                harness::run_norm_scaling(resolve(g, ExperimentKind::norm_scaling));
            } else {
                std::cerr << "unknown sweep kind '" << sweep_kind << "'\n";
                return 2;
            }
            std::printf("sweep '%s' written\n", sweep_kind.c_str());
        } else if (app.got_subcommand(c_plot)) {
            const Field f = spectral::read_field_binary(plot_in);
            const std::string dest = plot_out.empty() ? plot_in + ".csv" : plot_out;
            spectral::write_field_csv(f, dest);
            std::printf("wrote %s\n", dest.c_str());
        }
    } catch (const Error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
