#include "droplab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <thread>

#include "droplab/errors.hpp"
#include "droplab/fermi.hpp"
#include "droplab/kernels.hpp"
#include "droplab/rng.hpp"
#include "droplab/spectral.hpp"

namespace droplab::harness {

using droplet::DropletFamily;
using droplet::DropletState;
using nlohmann::json;
using spectral::Transform;

namespace {

double binomial_cdf(int k, int n, double p) {
    // P(X <= k); stable via log pmf
    if (k < 0) return 0.0;
    if (k >= n) return 1.0;
    if (p <= 0.0) return 1.0;
    if (p >= 1.0) return 0.0;
    double cdf = 0.0;
    for (int i = 0; i <= k; ++i) {
        const double lp = std::lgamma(n + 1.0) - std::lgamma(i + 1.0) -
                          std::lgamma(n - i + 1.0) + i * std::log(p) +
                          (n - i) * std::log1p(-p);
        cdf += std::exp(lp);
    }
    return std::min(cdf, 1.0);
}

int thread_count(const ExperimentConfig& cfg) {
    if (cfg.threads > 0) return cfg.threads;
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

// Runs job(i) for i in [0, n) on a small pool; results must be written to
// per-index slots so the aggregation is scheduling-independent.
void parallel_for(int n, int threads, const std::function<void(int)>& job) {
    if (threads <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) job(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr err;
    std::mutex err_mutex;
    for (int t = 0; t < std::min(threads, n); ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    job(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (!err) err = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

std::string outp(const ExperimentConfig& cfg, const std::string& name) {
    std::filesystem::create_directories(cfg.out_dir);
    return cfg.out_dir + "/" + name;
}

void write_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    out << j.dump(2) << "\n";
}

}  // namespace

Interval clopper_pearson(int successes, int trials, double confidence) {
    const double a = 1.0 - confidence;
    Interval iv;
    if (successes <= 0) {
        iv.lo = 0.0;
    } else {
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            // P(X >= k | mid) vs a/2
            if (1.0 - binomial_cdf(successes - 1, trials, mid) < a / 2)
                lo = mid;
            else
                hi = mid;
        }
        iv.lo = 0.5 * (lo + hi);
    }
    if (successes >= trials) {
        iv.hi = 1.0;
    } else {
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (binomial_cdf(successes, trials, mid) < a / 2)
                hi = mid;
            else
                lo = mid;
        }
        iv.hi = 0.5 * (lo + hi);
    }
    return iv;
}

Field random_transverse_field(const DropletState& d, const linop::EigenStructure& es,
                              std::uint64_t seed, std::uint32_t path, double target_hm1) {
    const Grid g = d.field.grid;
    const Transform& t = Transform::get(g);
    SpectralCoeffs v(g);
    rng::NormalStream ns(seed, rng::Stream::initial_condition, path);
    std::uint32_t draw = 0;
    for (int l = 0; l < g.ny; ++l) {
        for (int k = 0; k < g.nx; ++k) {
            if (k == 0 && l == 0) continue;
            const std::size_t idx = static_cast<std::size_t>(l) * g.nx + k;
            const double mu = t.mu()[idx];
            if (mu > 1000.0) continue;
            v.c[idx] = ns.normal(0, draw++) * std::pow(mu, -1.5);
        }
    }
    for (int i = 0; i < 2 && i < static_cast<int>(es.psi_hat.size()); ++i) {
        const double c = spectral::inner_hm1(v, es.psi_hat[i]);
        kernels::axpy(-c, es.psi_hat[i].data(), v.data(), v.size());
    }
    const double n0 = spectral::norm_hm1(v);
    if (n0 <= 0) throw Error("random_transverse_field: degenerate draw");
    for (double& x : v.c) x *= target_hm1 / n0;
    return t.inverse(v);
}

spde::NoiseSpec make_noise(const ExperimentConfig& cfg, double eps, Grid g) {
    if (cfg.noise.prefactor == 0.0) {
        spde::NoiseSpec ns;
        ns.grid = g;
        return ns;
    }
    const double target = cfg.noise.prefactor * std::pow(eps, cfg.noise.exponent);
    if (cfg.noise.calibrate == "eta2")
        return spde::NoiseSpec::power_law_eta2(g, cfg.noise.mu_cut, cfg.noise.decay, target);
    return spde::NoiseSpec::power_law(g, cfg.noise.mu_cut, cfg.noise.decay, target);
}

double field_energy_from_state(const spde::State& s, double eps) {
    const Transform& t = Transform::get(s.u.grid);
    const double grad2 =
        kernels::weighted_sumsq(t.mu().data(), s.u_hat.data(), s.u_hat.size());
    const double bulk =
        kernels::double_well_sum(s.u.data(), s.u.size()) * s.u.grid.cell_area();
    return 0.5 * eps * eps * grad2 + bulk;
}

// ---------------------------------------------------------------- exit time

namespace {

struct PathSeries {
    std::vector<double> t, hm1, l2, mass, energy, xix, xiy;
};

struct ExitPathResult {
    PathOutcome outcome;
    PathSeries series;
};

ExitPathResult run_exit_path(const ExperimentConfig& cfg, const DropletFamily& fam,
                             const linop::EigenStructure& es0, const spde::NoiseSpec& noise,
                             int path_index, double horizon, double tube_radius,
                             double l2_radius) {
    const double eps = fam.eps;
    const Grid g = fam.grid;
    ExitPathResult R;
    R.outcome.path = path_index;

    const DropletState base = fam.build(fam.xi0);
    spde::State state = spde::State::from_field(base.field);
    const double v0_norm = cfg.exit_time.init_nu * std::pow(eps, 4.0);
    if (v0_norm > 0) {
        const Field v0 = random_transverse_field(base, es0, cfg.seed,
                                                 static_cast<std::uint32_t>(path_index),
                                                 v0_norm);
        kernels::axpy(1.0, v0.data(), state.u.data(), state.u.size());
        state = spde::State::from_field(state.u);
    }
    const double mass0 = spectral::mass(state.u);

    spde::StepperConfig scfg;
    scfg.eps = eps;
    scfg.dt = cfg.sde.dt;
    scfg.kappa = cfg.sde.kappa;
    scfg.amplitude_cap = cfg.sde.amplitude_cap;
    const spde::Stepper stepper(g, scfg);

    fermi::FrameCache cache(fam, linop::EigenOptions{}, 0.1,
                            cfg.exit_time.projection_transport);
    fermi::ProjectionOptions popt;

    rng::NormalStream nstream(cfg.seed, rng::Stream::spde_noise,
                              static_cast<std::uint32_t>(path_index));
    SpectralCoeffs dw(g);

    const std::uint64_t steps = static_cast<std::uint64_t>(std::ceil(horizon / cfg.sde.dt));
    const int cadence = std::max(1, cfg.exit_time.diag_cadence);
    const std::uint64_t n_diag = steps / cadence + 2;
    int stride = cfg.exit_time.record_stride;
    if (stride <= 0) stride = static_cast<int>(std::max<std::uint64_t>(1, n_diag / 2000));

    Vec2 xi_last = fam.xi0;
    double prev_t = 0.0, prev_hm1 = 0.0, prev_l2 = 0.0;
    bool have_prev = false;
    long diag_count = 0;

    auto diagnose = [&](bool force) -> bool {
        fermi::FermiDecomposition fd;
        try {
            fd = project_to_manifold(cache, state.u, xi_last, popt);
        } catch (const Error& e) {
            R.outcome.exit_time = state.t;
            R.outcome.reason = "projection_failed";
            return true;
        }
        xi_last = fd.xi;
        R.outcome.max_hm1 = std::max(R.outcome.max_hm1, fd.v_hm1);
        R.outcome.final_hm1 = fd.v_hm1;
        R.outcome.final_l2 = fd.v_l2;
        R.outcome.final_xi = fd.xi;
        if (diag_count % stride == 0 || force) {
            R.series.t.push_back(state.t);
            R.series.hm1.push_back(fd.v_hm1);
            R.series.l2.push_back(fd.v_l2);
            R.series.mass.push_back(spectral::mass(state.u));
            R.series.energy.push_back(field_energy_from_state(state, eps));
            R.series.xix.push_back(fd.xi.x);
            R.series.xiy.push_back(fd.xi.y);
        }
        ++diag_count;

        auto crossing = [&](double n0, double n1, double thr) {
            if (!have_prev || n1 <= n0) return state.t;
            const double f = (thr - n0) / (n1 - n0);
            return prev_t + f * (state.t - prev_t);
        };
        if (fd.v_hm1 > tube_radius) {
            R.outcome.exit_time = crossing(prev_hm1, fd.v_hm1, tube_radius);
            R.outcome.reason = "hm1_tube";
            return true;
        }
        if (l2_radius > 0 && fd.v_l2 > l2_radius) {
            R.outcome.exit_time = crossing(prev_l2, fd.v_l2, l2_radius);
            R.outcome.reason = "l2_tube";
            return true;
        }
        const double bd = std::min(std::min(fd.xi.x, 1.0 - fd.xi.x),
                                   std::min(fd.xi.y, 1.0 - fd.xi.y));
        if (bd - fam.rho_phys < fam.delta) {
            R.outcome.exit_time = state.t;
            R.outcome.reason = "boundary";
            return true;
        }
        prev_t = state.t;
        prev_hm1 = fd.v_hm1;
        prev_l2 = fd.v_l2;
        have_prev = true;
        return false;
    };

    if (diagnose(true)) {
        R.outcome.mass_drift = spectral::mass(state.u) - mass0;
        return R;
    }
    for (std::uint64_t k = 1; k <= steps; ++k) {
        try {
            if (!noise.empty()) {
                spde::sample_increment(noise, cfg.sde.dt, nstream, k, dw);
                stepper.step(state, &dw);
            } else {
                stepper.step(state, nullptr);
            }
        } catch (const Diverged&) {
            R.outcome.exit_time = state.t;
            R.outcome.reason = "diverged";
            break;
        }
        if (k % cadence == 0 || k == steps) {
            if (diagnose(k == steps)) break;
        }
    }
    R.outcome.mass_drift = spectral::mass(state.u) - mass0;
    return R;
}

void write_series_csv(const std::string& path, const PathSeries& s) {
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw Error("cannot open " + path);
    std::fprintf(fp, "t,xi_x,xi_y,v_hm1,v_l2,energy,mass\n");
    for (std::size_t i = 0; i < s.t.size(); ++i)
        std::fprintf(fp, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", s.t[i], s.xix[i],
                     s.xiy[i], s.hm1[i], s.l2[i], s.energy[i], s.mass[i]);
    std::fclose(fp);
}

}  // namespace

ExitSummary run_exit_time(const ExperimentConfig& cfg) {
    const double eps = cfg.model.eps;
    const Grid g = Grid::unit_square(cfg.model.grid_n);
    DropletFamily fam = DropletFamily::create(g, eps, cfg.model.rho_phys, cfg.model.delta,
                                              {cfg.model.xi0[0], cfg.model.xi0[1]});
    const DropletState d0 = fam.build(fam.xi0);
    const linop::EigenStructure es0 = linop::leading_eigenpairs(d0, 3);
    const spde::NoiseSpec noise = make_noise(cfg, eps, g);

    ExitSummary S;
    S.paths = cfg.exit_time.paths;
    S.horizon = std::min(std::pow(eps, -cfg.exit_time.horizon_exponent),
                         cfg.exit_time.horizon_cap);
    S.tube_radius = cfg.exit_time.tube_c0 * std::pow(eps, cfg.exit_time.tube_m);
    S.l2_radius = cfg.exit_time.l2_radius_k >= 0
                      ? std::pow(eps, cfg.exit_time.l2_radius_k + 1.0)
                      : -1.0;
    S.eta0 = noise.eta0;
    S.eta1 = noise.eta1;
    S.eta2 = noise.eta2;

    std::vector<ExitPathResult> results(S.paths);
    parallel_for(S.paths, thread_count(cfg), [&](int i) {
        results[i] = run_exit_path(cfg, fam, es0, noise, i, S.horizon, S.tube_radius,
                                   S.l2_radius);
    });

    std::vector<std::string> outputs{"manifest.json", "summary.json", "ensemble.csv"};
    {
        std::FILE* fp = std::fopen(outp(cfg, "ensemble.csv").c_str(), "wb");
        std::fprintf(fp,
                     "path,exit_time,reason,max_v_hm1,final_v_hm1,final_v_l2,mass_drift,"
                     "xi_x,xi_y\n");
        for (const auto& r : results) {
            const auto& o = r.outcome;
            std::fprintf(fp, "%d,%.17g,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", o.path,
                         o.exit_time, o.reason.c_str(), o.max_hm1, o.final_hm1, o.final_l2,
                         o.mass_drift, o.final_xi.x, o.final_xi.y);
            S.outcomes.push_back(o);
            if (o.reason == "diverged") ++S.diverged;
            if (o.reason != "none") ++S.exits;
        }
        std::fclose(fp);
    }
    if (cfg.exit_time.write_paths) {
        for (const auto& r : results) {
            const std::string name = "path_" + std::to_string(r.outcome.path) + ".csv";
            write_series_csv(outp(cfg, name), r.series);
            outputs.push_back(name);
        }
    }
    S.exit_fraction = static_cast<double>(S.exits) / S.paths;
    S.ci = clopper_pearson(S.exits, S.paths);

    json j;
    j["paths"] = S.paths;
    j["exits"] = S.exits;
    j["diverged"] = S.diverged;
    j["exit_fraction"] = S.exit_fraction;
    j["ci95"] = {S.ci.lo, S.ci.hi};
    j["horizon"] = S.horizon;
    j["tube_radius_hm1"] = S.tube_radius;
    j["tube_radius_l2"] = S.l2_radius;
    j["eta0"] = S.eta0;
    j["eta1"] = S.eta1;
    j["eta2"] = S.eta2;
    j["dt"] = cfg.sde.dt;
    write_json(outp(cfg, "summary.json"), j);
    write_manifest(cfg, cfg.out_dir, outputs);
    return S;
}

// ----------------------------------------------------------------- coupling

namespace {

struct CouplingPathOut {
    CouplingSeedResult res;
    PathSeries series;
};

CouplingPathOut run_coupling_seed(const ExperimentConfig& cfg, const DropletFamily& fam,
                                  const linop::EigenStructure& es0,
                                  const spde::NoiseSpec& noise_base, int seed_index) {
    const double eps = fam.eps;
    const Grid g = fam.grid;
    CouplingPathOut out;
    out.res.seed_index = seed_index;

    const fermi::DriftMode mode = cfg.coupling.drift_mode == "leading"
                                      ? fermi::DriftMode::leading
                                      : fermi::DriftMode::full;

    // two passes: base noise and scaled noise, common random numbers
    for (int pass = 0; pass < 2; ++pass) {
        spde::NoiseSpec noise = noise_base;
        if (pass == 1) {
            if (cfg.coupling.scale_factor <= 0) break;
            noise.scale(std::sqrt(cfg.coupling.scale_factor));
        }

        const DropletState base = fam.build(fam.xi0);
        spde::State state = spde::State::from_field(base.field);
        const double v0_norm = cfg.coupling.init_nu * std::pow(eps, 4.0);
        if (v0_norm > 0) {
            const Field v0 = random_transverse_field(
                base, es0, cfg.seed, static_cast<std::uint32_t>(seed_index), v0_norm);
            kernels::axpy(1.0, v0.data(), state.u.data(), state.u.size());
            state = spde::State::from_field(state.u);
        }

        spde::StepperConfig scfg;
        scfg.eps = eps;
        scfg.dt = cfg.sde.dt;
        scfg.kappa = cfg.sde.kappa;
        const spde::Stepper stepper(g, scfg);

        fermi::FrameCache cache(fam, linop::EigenOptions{}, 0.1,
                                cfg.coupling.projection_transport);
        fermi::ProjectionOptions popt;
        rng::NormalStream nstream(cfg.seed, rng::Stream::spde_noise,
                                  static_cast<std::uint32_t>(seed_index));

        Vec2 xi_full = fam.xi0, xi_vfed = fam.xi0, xi_v0 = fam.xi0;
        double sup_dv = 0.0, sup_d0 = 0.0, disp = 0.0;

        fermi::FermiDecomposition fd = project_to_manifold(cache, state.u, xi_full, popt);
        xi_full = fd.xi;
        xi_vfed = fd.xi;
        xi_v0 = fd.xi;
        const Vec2 xi_start = fd.xi;
        fermi::ReducedCoefficients rc_vfed =
            reduced_coefficients(cache, fd, noise, mode);
        fermi::FermiDecomposition fd_empty;
        fd_empty.xi = fd.xi;
        fermi::ReducedCoefficients rc_v0 =
            reduced_coefficients(cache, fd_empty, noise, mode);

        const std::uint64_t steps =
            static_cast<std::uint64_t>(std::ceil(cfg.coupling.horizon / cfg.sde.dt));
        const int cadence = std::max(1, cfg.coupling.diag_cadence);
        SpectralCoeffs dw(g);
        const bool have_noise = !noise.empty();

        for (std::uint64_t k = 1; k <= steps; ++k) {
            const SpectralCoeffs* dwp = nullptr;
            if (have_noise) {
                spde::sample_increment(noise, cfg.sde.dt, nstream, k, dw);
                dwp = &dw;
            }
            stepper.step(state, dwp);
            if (have_noise) {
                xi_vfed = reduced_sde_step(fam, xi_vfed, rc_vfed, cfg.sde.dt, dw);
                xi_v0 = reduced_sde_step(fam, xi_v0, rc_v0, cfg.sde.dt, dw);
            } else {
                xi_vfed.x += rc_vfed.f.x * cfg.sde.dt;
                xi_vfed.y += rc_vfed.f.y * cfg.sde.dt;
                xi_v0.x += rc_v0.f.x * cfg.sde.dt;
                xi_v0.y += rc_v0.f.y * cfg.sde.dt;
            }

            if (k % cadence == 0 || k == steps) {
                fd = project_to_manifold(cache, state.u, xi_full, popt);
                xi_full = fd.xi;
                rc_vfed = reduced_coefficients(cache, fd, noise, mode);
                fd_empty.xi = fd.xi;
                rc_v0 = reduced_coefficients(cache, fd_empty, noise, mode);
                sup_dv = std::max(sup_dv, (xi_full - xi_vfed).norm());
                sup_d0 = std::max(sup_d0, (xi_full - xi_v0).norm());
                disp = std::max(disp, (xi_full - xi_start).norm());
                if (pass == 0) {
                    out.series.t.push_back(state.t);
                    out.series.xix.push_back(xi_full.x);
                    out.series.xiy.push_back(xi_full.y);
                    out.series.hm1.push_back(fd.v_hm1);
                    out.series.l2.push_back(fd.v_l2);
                    out.series.mass.push_back(spectral::mass(state.u));
                    out.series.energy.push_back(field_energy_from_state(state, eps));
                }
            }
        }
        if (pass == 0) {
            out.res.sup_dxi_vfed = sup_dv;
            out.res.sup_dxi_v0 = sup_d0;
            out.res.displacement = disp;
            out.res.ratio_vfed = disp > 0 ? sup_dv / disp : 0.0;
            out.res.ratio_v0 = disp > 0 ? sup_d0 / disp : 0.0;
        } else {
            out.res.displacement_scaled = disp;
        }
    }
    return out;
}

}  // namespace

CouplingSummary run_coupling(const ExperimentConfig& cfg) {
    const double eps = cfg.model.eps;
    const Grid g = Grid::unit_square(cfg.model.grid_n);
    DropletFamily fam = DropletFamily::create(g, eps, cfg.model.rho_phys, cfg.model.delta,
                                              {cfg.model.xi0[0], cfg.model.xi0[1]});
    const DropletState d0 = fam.build(fam.xi0);
    const linop::EigenStructure es0 = linop::leading_eigenpairs(d0, 3);
    const spde::NoiseSpec noise = make_noise(cfg, eps, g);

    CouplingSummary S;
    S.scale_factor = cfg.coupling.scale_factor;
    S.eta0 = noise.eta0;
    std::vector<CouplingPathOut> outs(cfg.coupling.seeds);
    parallel_for(cfg.coupling.seeds, thread_count(cfg), [&](int i) {
        outs[i] = run_coupling_seed(cfg, fam, es0, noise, i);
    });

    std::vector<std::string> outputs{"manifest.json", "summary.json", "seeds.csv"};
    std::FILE* fp = std::fopen(outp(cfg, "seeds.csv").c_str(), "wb");
    std::fprintf(fp,
                 "seed,sup_dxi_vfed,sup_dxi_v0,displacement,displacement_scaled,"
                 "ratio_vfed,ratio_v0\n");
    double sum2 = 0.0, sum2s = 0.0;
    for (auto& o : outs) {
        S.seeds.push_back(o.res);
        S.max_ratio_vfed = std::max(S.max_ratio_vfed, o.res.ratio_vfed);
        S.max_ratio_v0 = std::max(S.max_ratio_v0, o.res.ratio_v0);
        sum2 += o.res.displacement * o.res.displacement;
        sum2s += o.res.displacement_scaled * o.res.displacement_scaled;
        std::fprintf(fp, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", o.res.seed_index,
                     o.res.sup_dxi_vfed, o.res.sup_dxi_v0, o.res.displacement,
                     o.res.displacement_scaled, o.res.ratio_vfed, o.res.ratio_v0);
        const std::string name = "coupling_path_" + std::to_string(o.res.seed_index) + ".csv";
        write_series_csv(outp(cfg, name), o.series);
        outputs.push_back(name);
    }
    std::fclose(fp);
    S.rms_displacement = std::sqrt(sum2 / std::max<std::size_t>(1, outs.size()));
    S.rms_displacement_scaled = std::sqrt(sum2s / std::max<std::size_t>(1, outs.size()));

    json j;
    j["seeds"] = cfg.coupling.seeds;
    j["horizon"] = cfg.coupling.horizon;
    j["eta0"] = S.eta0;
    j["max_ratio_vfed"] = S.max_ratio_vfed;
    j["max_ratio_v0"] = S.max_ratio_v0;
    j["rms_displacement"] = S.rms_displacement;
    j["rms_displacement_scaled"] = S.rms_displacement_scaled;
    j["scale_factor"] = S.scale_factor;
    j["expected_rms_ratio"] = std::sqrt(S.scale_factor);
    if (S.rms_displacement > 0)
        j["measured_rms_ratio"] = S.rms_displacement_scaled / S.rms_displacement;
    write_json(outp(cfg, "summary.json"), j);
    write_manifest(cfg, cfg.out_dir, outputs);
    return S;
}

// ------------------------------------------------------------------- sweeps

SpectralSweepResult run_spectral_sweep(const ExperimentConfig& cfg) {
    SpectralSweepResult R;
    const Grid g = Grid::unit_square(cfg.model.grid_n);
    for (double eps : cfg.model.eps_values()) {
        DropletFamily fam = DropletFamily::create(g, eps, cfg.model.rho_phys,
                                                  cfg.model.delta,
                                                  {cfg.model.xi0[0], cfg.model.xi0[1]});
        const DropletState d = fam.build(fam.xi0);
        linop::EigenOptions eopt;
        eopt.tol = cfg.sweep.eigen_tol;
        const auto es = linop::leading_eigenpairs(d, std::max(3, cfg.sweep.eigen_count), eopt);
        const auto mu = linop::allen_cahn_eigenvalues(d, 3, eopt);
        SpectralRow row;
        row.eps = eps;
        row.lambda1 = es.lambda[0];
        row.lambda2 = es.lambda[1];
        row.lambda3 = es.lambda[2];
        row.mu1 = mu[0];
        row.mu2 = mu[1];
        row.mu3 = mu[2];
        row.dbar = es.dbar;
        row.eigen_residual = es.max_residual;
        R.rows.push_back(row);
    }
    double l3min = 1e300, l3max = 0, m3min = 1e300, m3max = 0;
    for (const auto& r : R.rows) {
        l3min = std::min(l3min, r.lambda3 / r.eps);
        l3max = std::max(l3max, r.lambda3 / r.eps);
        m3min = std::min(m3min, r.mu3 / (r.eps * r.eps));
        m3max = std::max(m3max, r.mu3 / (r.eps * r.eps));
    }
    R.lambda3_over_eps_spread = l3max / l3min;
    R.mu3_over_eps2_min = m3min;
    R.mu3_over_eps2_spread = m3max / m3min;

    std::FILE* fp = std::fopen(outp(cfg, "spectral.csv").c_str(), "wb");
    std::fprintf(fp, "eps,lambda1,lambda2,lambda3,mu1,mu2,mu3,dbar,eigen_residual\n");
    for (const auto& r : R.rows)
        std::fprintf(fp, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.eps,
                     r.lambda1, r.lambda2, r.lambda3, r.mu1, r.mu2, r.mu3, r.dbar,
                     r.eigen_residual);
    std::fclose(fp);
    json j;
    j["lambda3_over_eps_spread"] = R.lambda3_over_eps_spread;
    j["mu3_over_eps2_min"] = R.mu3_over_eps2_min;
    j["mu3_over_eps2_spread"] = R.mu3_over_eps2_spread;
    write_json(outp(cfg, "summary.json"), j);
    write_manifest(cfg, cfg.out_dir, {"manifest.json", "summary.json", "spectral.csv"});
    return R;
}

ProfileSweepResult run_profile_sweep(const ExperimentConfig& cfg) {
    ProfileSweepResult R;
    for (double rho : cfg.sweep.rho_list) {
        const auto p = radial::solve_radial_profile(rho, rho + cfg.sweep.r_max_pad, 1e-8);
        ProfileRow row;
        row.rho = p.rho;
        row.sigma = p.sigma;
        row.sigma_rho = p.sigma * p.rho;
        row.alpha = p.alpha;
        row.nu = p.nu;
        row.residual = p.residual;
        // tail slope of log(alpha - U) on r - rho in [3, 10]
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int n = 0;
        for (double x = 3.0; x <= 10.0; x += 0.25) {
            const double diff = p.alpha - p.value(p.rho + x);
            if (diff <= 1e-14) continue;
            const double y = std::log(diff);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            ++n;
        }
        const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        row.tail_slope = -slope;
        row.tail_slope_err = std::abs(row.tail_slope - std::sqrt(2.0)) / std::sqrt(2.0);
        R.rows.push_back(row);
    }
    // least squares sigma ~ c1/rho + c2/rho^2
    double a11 = 0, a12 = 0, a22 = 0, b1 = 0, b2 = 0;
    for (const auto& r : R.rows) {
        const double x1 = 1.0 / r.rho, x2 = x1 * x1;
        a11 += x1 * x1;
        a12 += x1 * x2;
        a22 += x2 * x2;
        b1 += x1 * r.sigma;
        b2 += x2 * r.sigma;
    }
    const double det = a11 * a22 - a12 * a12;
    R.fit_c1 = (a22 * b1 - a12 * b2) / det;
    R.fit_c2 = (a11 * b2 - a12 * b1) / det;
    double num = 0, den = 0;
    for (const auto& r : R.rows) {
        const double fit = R.fit_c1 / r.rho + R.fit_c2 / (r.rho * r.rho);
        num += (r.sigma - fit) * (r.sigma - fit);
        den += r.sigma * r.sigma;
    }
    R.fit_rel_residual = std::sqrt(num / den);

    std::FILE* fp = std::fopen(outp(cfg, "profiles.csv").c_str(), "wb");
    std::fprintf(fp, "rho,sigma,sigma_rho,alpha,nu,residual,tail_slope,tail_slope_err\n");
    for (const auto& r : R.rows)
        std::fprintf(fp, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.rho, r.sigma,
                     r.sigma_rho, r.alpha, r.nu, r.residual, r.tail_slope, r.tail_slope_err);
    std::fclose(fp);
    json j;
    j["fit_c1"] = R.fit_c1;
    j["fit_c2"] = R.fit_c2;
    j["fit_rel_residual"] = R.fit_rel_residual;
    write_json(outp(cfg, "summary.json"), j);
    write_manifest(cfg, cfg.out_dir, {"manifest.json", "summary.json", "profiles.csv"});
    return R;
}

NormScalingResult run_norm_scaling(const ExperimentConfig& cfg) {
    NormScalingResult R;
    const Grid g = Grid::unit_square(cfg.model.grid_n);
    for (double eps : cfg.model.eps_values()) {
        DropletFamily fam = DropletFamily::create(g, eps, cfg.model.rho_phys,
                                                  cfg.model.delta,
                                                  {cfg.model.xi0[0], cfg.model.xi0[1]});
        const DropletState d = fam.build(fam.xi0, fam.mass0, /*with_second=*/true);
        NormScalingRow row;
        row.eps = eps;
        for (int j = 0; j < 2; ++j) {
            row.tangent_hm1 = std::max(row.tangent_hm1, spectral::norm_hm1(d.tangent[j]));
            row.tangent_l2 = std::max(row.tangent_l2,
                                      spectral::norm_l2(d.tangent[j]) * std::sqrt(eps));
        }
        for (int k = 0; k < 3; ++k) {
            const Field z = spectral::project_zero_mean(d.second[k]);
            row.second_l2 = std::max(row.second_l2,
                                     spectral::norm_l2(d.second[k]) * std::pow(eps, 1.5));
            row.second_hm1 = std::max(row.second_hm1,
                                      spectral::norm_hm1(z) * std::sqrt(eps));
        }
        R.rows.push_back(row);
    }
    auto spread = [&](auto get) {
        double lo = 1e300, hi = 0;
        for (const auto& r : R.rows) {
            lo = std::min(lo, get(r));
            hi = std::max(hi, get(r));
        }
        return hi / lo - 1.0;
    };
    R.var_tangent_hm1 = spread([](const NormScalingRow& r) { return r.tangent_hm1; });
    R.var_tangent_l2 = spread([](const NormScalingRow& r) { return r.tangent_l2; });
    R.var_second_l2 = spread([](const NormScalingRow& r) { return r.second_l2; });
    R.var_second_hm1 = spread([](const NormScalingRow& r) { return r.second_hm1; });

    std::FILE* fp = std::fopen(outp(cfg, "norm_scaling.csv").c_str(), "wb");
    std::fprintf(fp, "eps,tangent_hm1,tangent_l2_sqrt_eps,second_l2_eps32,second_hm1_sqrt_eps\n");
    for (const auto& r : R.rows)
        std::fprintf(fp, "%.17g,%.17g,%.17g,%.17g,%.17g\n", r.eps, r.tangent_hm1,
                     r.tangent_l2, r.second_l2, r.second_hm1);
    std::fclose(fp);
    json j;
    j["var_tangent_hm1"] = R.var_tangent_hm1;
    j["var_tangent_l2"] = R.var_tangent_l2;
    j["var_second_l2"] = R.var_second_l2;
    j["var_second_hm1"] = R.var_second_hm1;
    write_json(outp(cfg, "summary.json"), j);
    write_manifest(cfg, cfg.out_dir, {"manifest.json", "summary.json", "norm_scaling.csv"});
    return R;
}

// ----------------------------------------------------------------- simulate

SimulateResult run_simulate(const ExperimentConfig& cfg) {
    const double eps = cfg.model.eps;
    const Grid g = Grid::unit_square(cfg.model.grid_n);
    DropletFamily fam = DropletFamily::create(g, eps, cfg.model.rho_phys, cfg.model.delta,
                                              {cfg.model.xi0[0], cfg.model.xi0[1]});
    const spde::NoiseSpec noise = make_noise(cfg, eps, g);

    spde::State state;
    if (!cfg.simulate.resume.empty()) {
        std::ifstream in(cfg.simulate.resume);
        if (!in) throw Error("cannot open checkpoint " + cfg.simulate.resume);
        json ck = json::parse(in);
        state = spde::State::from_field(
            spectral::read_field_binary(ck.at("field_file").get<std::string>()));
        state.t = ck.at("t").get<double>();
        state.step = ck.at("step").get<std::uint64_t>();
    } else {
        state = spde::State::from_field(fam.build(fam.xi0).field);
    }

    spde::StepperConfig scfg;
    scfg.eps = eps;
    scfg.dt = cfg.sde.dt;
    scfg.kappa = cfg.sde.kappa;
    scfg.amplitude_cap = cfg.sde.amplitude_cap;
    const spde::Stepper stepper(g, scfg);
    rng::NormalStream nstream(cfg.seed, rng::Stream::spde_noise, 0);

    const std::uint64_t target_steps =
        static_cast<std::uint64_t>(std::ceil(cfg.simulate.horizon / cfg.sde.dt));
    SpectralCoeffs dw(g);
    PathSeries series;

    auto write_checkpoint = [&](const std::string& stem) {
        const std::string ffile = outp(cfg, stem + ".field.bin");
        spectral::write_field_binary(state.u, ffile);
        json ck;
        ck["t"] = state.t;
        ck["step"] = state.step;
        ck["seed"] = cfg.seed;
        ck["field_file"] = ffile;
        ck["config"] = cfg.to_json();
        write_json(outp(cfg, stem + ".json"), ck);
        return outp(cfg, stem + ".json");
    };

    std::string last_ck;
    while (state.step < target_steps) {
        const std::uint64_t k = state.step + 1;
        if (!noise.empty()) {
            spde::sample_increment(noise, cfg.sde.dt, nstream, k, dw);
            stepper.step(state, &dw);
        } else {
            stepper.step(state, nullptr);
        }
        if (state.step % std::max(1, cfg.simulate.record_stride) == 0 ||
            state.step == target_steps) {
            series.t.push_back(state.t);
            series.xix.push_back(0.0);
            series.xiy.push_back(0.0);
            series.hm1.push_back(0.0);
            series.l2.push_back(0.0);
            series.mass.push_back(spectral::mass(state.u));
            series.energy.push_back(field_energy_from_state(state, eps));
        }
        if (cfg.simulate.checkpoint_every > 0 &&
            state.step % cfg.simulate.checkpoint_every == 0)
            last_ck = write_checkpoint("checkpoint_" + std::to_string(state.step));
    }
    last_ck = write_checkpoint("checkpoint_final");
    write_series_csv(outp(cfg, "series.csv"), series);

    SimulateResult R;
    R.final_t = state.t;
    R.final_step = state.step;
    R.final_mass = spectral::mass(state.u);
    R.final_energy = field_energy_from_state(state, eps);
    R.checkpoint_path = last_ck;
    json j;
    j["final_t"] = R.final_t;
    j["final_step"] = R.final_step;
    j["final_mass"] = R.final_mass;
    j["final_energy"] = R.final_energy;
    write_json(outp(cfg, "summary.json"), j);
    write_manifest(cfg, cfg.out_dir,
                   {"manifest.json", "summary.json", "series.csv", "checkpoint_final.json",
                    "checkpoint_final.field.bin"});
    return R;
}

}  // namespace droplab::harness
