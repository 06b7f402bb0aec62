#include "droplab/spde.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "droplab/errors.hpp"
#include "droplab/kernels.hpp"
#include "droplab/spectral.hpp"

namespace droplab::spde {

using spectral::Transform;

void NoiseSpec::recompute_strengths() {
    eta0 = eta1 = eta2 = 0.0;
    for (std::size_t m = 0; m < modes.size(); ++m) {
        const double a2 = alpha[m] * alpha[m];
        eta0 += a2;
        eta1 = std::max(eta1, a2);
        eta2 += a2 * modes[m].mu;
    }
}

void NoiseSpec::scale(double factor) {
    for (double& a : alpha) a *= factor;
    recompute_strengths();
}

namespace {

NoiseSpec power_law_modes(Grid g, double mu_cut, double decay) {
    NoiseSpec ns;
    ns.grid = g;
    const Transform& t = Transform::get(g);
    for (int l = 0; l < g.ny; ++l) {
        for (int k = 0; k < g.nx; ++k) {
            if (k == 0 && l == 0) continue;
            const std::size_t idx = static_cast<std::size_t>(l) * g.nx + k;
            const double mu = t.mu()[idx];
            if (mu > mu_cut) continue;
            ns.modes.push_back({k, l, idx, mu});
            ns.alpha.push_back(std::pow(mu, -decay));
        }
    }
    if (ns.modes.empty()) throw Error("noise: no modes below mu_cut");
    return ns;
}

}  // namespace

NoiseSpec NoiseSpec::power_law(Grid g, double mu_cut, double decay, double eta0_target) {
    NoiseSpec ns = power_law_modes(g, mu_cut, decay);
    ns.recompute_strengths();
    ns.scale(std::sqrt(eta0_target / ns.eta0));
    return ns;
}

NoiseSpec NoiseSpec::power_law_eta2(Grid g, double mu_cut, double decay, double eta2_target) {
    NoiseSpec ns = power_law_modes(g, mu_cut, decay);
    ns.recompute_strengths();
    ns.scale(std::sqrt(eta2_target / ns.eta2));
    return ns;
}

void sample_increment(const NoiseSpec& ns, double dt, const rng::NormalStream& st,
                      std::uint64_t step, SpectralCoeffs& dw) {
    dw.grid = ns.grid;
    dw.c.assign(ns.grid.size(), 0.0);
    const double sdt = std::sqrt(dt);
    for (std::size_t m = 0; m < ns.modes.size(); ++m) {
        const double nrm = st.normal(step, static_cast<std::uint32_t>(m));
        // e_m = sqrt(mu) phi_m, so the phi-coefficient gets alpha sqrt(mu).
        dw.c[ns.modes[m].idx] = ns.alpha[m] * sdt * nrm * std::sqrt(ns.modes[m].mu);
    }
}

SpectralCoeffs sample_increment(const NoiseSpec& ns, double dt,
                                const rng::NormalStream& st, std::uint64_t step) {
    SpectralCoeffs dw(ns.grid);
    sample_increment(ns, dt, st, step, dw);
    return dw;
}

double q_pairing(const NoiseSpec& ns, const SpectralCoeffs& a, const SpectralCoeffs& b) {
    double s = 0.0;
    for (std::size_t m = 0; m < ns.modes.size(); ++m) {
        const auto& md = ns.modes[m];
        // <f, e_m>_{H^-1} = f^_m / sqrt(mu_m)
        s += ns.alpha[m] * ns.alpha[m] * a.c[md.idx] * b.c[md.idx] / md.mu;
    }
    return s;
}

SpectralCoeffs q_apply(const NoiseSpec& ns, const SpectralCoeffs& f) {
    SpectralCoeffs out(f.grid);
    for (std::size_t m = 0; m < ns.modes.size(); ++m)
        out.c[ns.modes[m].idx] = ns.alpha[m] * ns.alpha[m] * f.c[ns.modes[m].idx];
    return out;
}

State State::from_field(const Field& f) {
    State s;
    s.u = f;
    s.u_hat = Transform::get(f.grid).forward(f);
    return s;
}

Stepper::Stepper(Grid g, const StepperConfig& cfg)
    : grid_(g), cfg_(cfg), nl_(g), nl_hat_(g) {
    if (!(cfg.dt > 0)) throw Error("stepper: dt must be positive");
    const Transform& t = Transform::get(g);
    const std::size_t n = g.size();
    c_keep_.resize(n);
    c_nl_.resize(n);
    c_noise_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double mu = t.mu()[i];
        const double den = 1.0 + cfg.dt * (cfg.eps * cfg.eps * mu * mu + cfg.kappa * mu);
        c_keep_[i] = (1.0 + cfg.dt * cfg.kappa * mu) / den;
        c_nl_[i] = -cfg.dt * mu / den;  // minus: the combine kernels only add
        c_noise_[i] = 1.0 / den;
    }
}

void Stepper::step(State& s, const SpectralCoeffs* dw) const {
    if (s.u.grid != grid_) throw Error("stepper/state grid mismatch");
    const Transform& t = Transform::get(grid_);
    const std::size_t n = grid_.size();
    kernels::double_well_prime(s.u.data(), nl_.data(), n);
    t.forward(nl_, nl_hat_);
    if (dw) {
        kernels::combine3(c_keep_.data(), s.u_hat.data(), c_nl_.data(), nl_hat_.data(),
                          c_noise_.data(), dw->data(), s.u_hat.data(), n);
    } else {
        kernels::combine2(c_keep_.data(), s.u_hat.data(), c_nl_.data(), nl_hat_.data(),
                          s.u_hat.data(), n);
    }
    t.inverse(s.u_hat, s.u);
    s.t += cfg_.dt;
    ++s.step;
    double amax = 0.0;
    for (std::size_t i = 0; i < n; i += 17) amax = std::max(amax, std::abs(s.u.v[i]));
    if (amax > cfg_.amplitude_cap)
        throw Diverged("amplitude " + std::to_string(amax) + " at t=" + std::to_string(s.t));
}

double residual(const Field& u, double eps) {
    const Transform& t = Transform::get(u.grid);
    const std::size_t n = u.grid.size();
    Field nl(u.grid);
    kernels::double_well_prime(u.data(), nl.data(), n);
    SpectralCoeffs nl_hat = t.forward(nl);
    const SpectralCoeffs u_hat = t.forward(u);
    double sum = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
        const double mu = t.mu()[i];
        // lap(eps^2 lap u - F'(u)) coefficient: eps^2 mu^2 u^ + mu F'(u)^
        const double r = eps * eps * mu * mu * u_hat.c[i] + mu * nl_hat.c[i];
        sum += r * r / mu;
    }
    return std::sqrt(sum);
}

double nonlinearity_pairing(const Field& droplet_field, double eps, const Field& v) {
    if (droplet_field.grid != v.grid) throw Error("nonlinearity_pairing: grid mismatch");
    const double m = spectral::mean(v);
    const double l2 = spectral::norm_l2(v);
    if (std::abs(m) > 1e-10 * (l2 > 0 ? l2 : 1.0))
        throw NonzeroMean("nonlinearity_pairing");
    const double grad2 = spectral::norm_h1(v);
    double quad = 0.0, cubic = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double ut = droplet_field.v[i];
        const double fpp = 3.0 * ut * ut - 1.0;
        const double vv = v.v[i];
        quad += fpp * vv * vv;
        cubic += 3.0 * ut * vv * vv * vv + vv * vv * vv * vv;
    }
    const double area = v.grid.cell_area();
    return -(eps * eps * grad2 * grad2 + quad * area) - cubic * area;
}

double cubic_pairing(const Field& droplet_field, const Field& v) {
    double cubic = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double vv = v.v[i];
        cubic += 3.0 * droplet_field.v[i] * vv * vv * vv + vv * vv * vv * vv;
    }
    return -cubic * v.grid.cell_area();
}

}  // namespace droplab::spde
