#include "droplab/radial.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "droplab/errors.hpp"

namespace droplab::radial {

namespace {

double fprime(double u) { return u * (u * u - 1.0); }
double fsecond(double u) { return 3.0 * u * u - 1.0; }

// Root of F'(a) + sigma = 0 close to +1.
double far_field_root(double sigma) {
    double a = 1.0;
    for (int it = 0; it < 60; ++it) {
        const double f = fprime(a) + sigma;
        const double df = fsecond(a);
        const double step = f / df;
        a -= step;
        if (std::abs(step) < 1e-15) break;
    }
    return a;
}

struct Tridiag {
    std::vector<double> lo, di, up;
    explicit Tridiag(std::size_t n) : lo(n), di(n), up(n) {}
};

// Thomas solve; rhs is overwritten with the solution.
void solve_tridiag(Tridiag& m, std::vector<double>& rhs) {
    const std::size_t n = rhs.size();
    for (std::size_t i = 1; i < n; ++i) {
        const double w = m.lo[i] / m.di[i - 1];
        m.di[i] -= w * m.up[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    rhs[n - 1] /= m.di[n - 1];
    for (std::size_t i = n - 1; i-- > 0;)
        rhs[i] = (rhs[i] - m.up[i] * rhs[i + 1]) / m.di[i];
}

// Residual of the discrete radial operator; ghost nodes encode U'(0) =
// U'(r_max) = 0.
void radial_residual(const std::vector<double>& U, double sigma, double dr,
                     std::vector<double>& res) {
    const std::size_t n = U.size();
    const double idr2 = 1.0 / (dr * dr);
    res.resize(n);
    res[0] = 4.0 * (U[1] - U[0]) * idr2 - fprime(U[0]) - sigma;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double r = static_cast<double>(i) * dr;
        res[i] = (U[i + 1] - 2.0 * U[i] + U[i - 1]) * idr2 +
                 (U[i + 1] - U[i - 1]) / (2.0 * dr * r) - fprime(U[i]) - sigma;
    }
    res[n - 1] = 2.0 * (U[n - 2] - U[n - 1]) * idr2 - fprime(U[n - 1]) - sigma;
}

double sup_norm(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

// Zero crossing of U (negative core to positive far field); 0 when the
// solution carries no droplet.
double zero_crossing(const std::vector<double>& U, double dr) {
    for (std::size_t i = 0; i + 1 < U.size(); ++i) {
        if (U[i] < 0.0 && U[i + 1] >= 0.0) {
            const double f = -U[i] / (U[i + 1] - U[i]);
            return (static_cast<double>(i) + f) * dr;
        }
    }
    return 0.0;
}

void kink_guess(std::vector<double>& U, double rho, double sigma, double dr) {
    const double alpha = far_field_root(sigma);
    const double beta = -alpha - sigma / fsecond(-alpha);  // root near -1
    for (std::size_t i = 0; i < U.size(); ++i) {
        const double r = static_cast<double>(i) * dr;
        U[i] = beta + 0.5 * (alpha - beta) * (1.0 + std::tanh((r - rho) / std::sqrt(2.0)));
    }
}

constexpr double kSigmaFold = 0.38490017945975052;  // 2/(3 sqrt 3), cubic fold

}  // namespace

Spline::Spline(double x0, double dx, const std::vector<double>& y,
               double slope_left, double slope_right)
    : x0_(x0), dx_(dx), y_(y) {
    // Clamped cubic spline: tridiagonal system for nodal second derivatives.
    const std::size_t n = y.size();
    m_.assign(n, 0.0);
    if (n < 3) return;
    std::vector<double> lo(n, 1.0), di(n, 4.0), up(n, 1.0), rhs(n);
    di[0] = 2.0;
    di[n - 1] = 2.0;
    rhs[0] = 6.0 / dx * ((y[1] - y[0]) / dx - slope_left);
    rhs[n - 1] = 6.0 / dx * (slope_right - (y[n - 1] - y[n - 2]) / dx);
    for (std::size_t i = 1; i + 1 < n; ++i)
        rhs[i] = 6.0 * (y[i + 1] - 2.0 * y[i] + y[i - 1]) / (dx * dx);
    for (std::size_t i = 1; i < n; ++i) {
        const double w = lo[i] / di[i - 1];
        di[i] -= w * up[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    m_[n - 1] = rhs[n - 1] / di[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) m_[i] = (rhs[i] - up[i] * m_[i + 1]) / di[i];
}

double Spline::operator()(double x) const {
    const std::size_t n = y_.size();
    double t = (x - x0_) / dx_;
    if (t <= 0.0) return y_.front();
    if (t >= static_cast<double>(n - 1)) return y_.back();
    const std::size_t i = static_cast<std::size_t>(t);
    const double a = t - static_cast<double>(i);
    const double b = 1.0 - a;
    return b * y_[i] + a * y_[i + 1] +
           dx_ * dx_ / 6.0 * ((b * b * b - b) * m_[i] + (a * a * a - a) * m_[i + 1]);
}

double Spline::deriv(double x) const {
    const std::size_t n = y_.size();
    double t = (x - x0_) / dx_;
    if (t <= 0.0) t = 0.0;
    if (t >= static_cast<double>(n - 1)) return 0.0;
    const std::size_t i = static_cast<std::size_t>(t);
    const double a = t - static_cast<double>(i);
    const double b = 1.0 - a;
    return (y_[i + 1] - y_[i]) / dx_ +
           dx_ / 6.0 * ((3.0 * a * a - 1.0) * m_[i + 1] - (3.0 * b * b - 1.0) * m_[i]);
}

double Spline::second(double x) const {
    const std::size_t n = y_.size();
    double t = (x - x0_) / dx_;
    if (t <= 0.0) t = 0.0;
    if (t >= static_cast<double>(n - 1)) return 0.0;
    const std::size_t i = static_cast<std::size_t>(t);
    const double a = t - static_cast<double>(i);
    return (1.0 - a) * m_[i] + a * m_[i + 1];
}

double RadialProfile::value(double rr) const {
    if (rr >= r_max) return alpha;
    return u_spline(rr);
}

double RadialProfile::deriv(double rr) const {
    if (rr >= r_max) return 0.0;
    return u_spline.deriv(rr);
}

double RadialProfile::second(double rr) const {
    if (rr >= r_max) return 0.0;
    return u_spline.second(rr);
}

double RadialProfile::rho_deriv(double rr) const {
    if (rr >= r_max) return 0.0;
    return urho_spline(rr);
}

namespace {

// One damped Newton run on the bordered system (U, sigma) with the zero
// crossing pinned at rho by a linear-interpolation row.  Returns the final
// residual sup norm (BVP rows and pin row combined).
double newton_pinned(std::vector<double>& U, double& sigma, double rho, double dr,
                     double tol, int max_iter, std::string* trace) {
    const std::size_t n = U.size();
    const double idr2 = 1.0 / (dr * dr);
    const std::size_t ip = static_cast<std::size_t>(rho / dr);
    const double w1 = rho / dr - static_cast<double>(ip);
    const double w0 = 1.0 - w1;

    std::vector<double> res, a, b, trialU;
    Tridiag J(n);
    auto total_residual = [&](const std::vector<double>& UU, double sg) {
        radial_residual(UU, sg, dr, res);
        return std::max(sup_norm(res), std::abs(w0 * UU[ip] + w1 * UU[ip + 1]));
    };

    double rnorm = total_residual(U, sigma);
    for (int it = 0; it < max_iter && rnorm > tol; ++it) {
        J.di[0] = -4.0 * idr2 - fsecond(U[0]);
        J.up[0] = 4.0 * idr2;
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double r = static_cast<double>(i) * dr;
            J.lo[i] = idr2 - 1.0 / (2.0 * dr * r);
            J.di[i] = -2.0 * idr2 - fsecond(U[i]);
            J.up[i] = idr2 + 1.0 / (2.0 * dr * r);
        }
        J.lo[n - 1] = 2.0 * idr2;
        J.di[n - 1] = -2.0 * idr2 - fsecond(U[n - 1]);

        // Bordered solve: J dU = -res + dsigma * 1, pin . dU = -pin_val.
        radial_residual(U, sigma, dr, res);
        a = res;
        for (double& x : a) x = -x;
        Tridiag J2 = J;
        solve_tridiag(J2, a);
        b.assign(n, 1.0);
        J2 = J;
        solve_tridiag(J2, b);
        const double pin_val = w0 * U[ip] + w1 * U[ip + 1];
        const double pin_a = w0 * a[ip] + w1 * a[ip + 1];
        const double pin_b = w0 * b[ip] + w1 * b[ip + 1];
        if (std::abs(pin_b) < 1e-300) return rnorm;
        const double dsigma = (-pin_val - pin_a) / pin_b;

        double lambda = 1.0;
        double new_norm = rnorm;
        double trial_sigma = sigma;
        for (int half = 0; half < 10; ++half) {
            trialU = U;
            for (std::size_t i = 0; i < n; ++i) trialU[i] += lambda * (a[i] + dsigma * b[i]);
            trial_sigma = sigma + lambda * dsigma;
            new_norm = total_residual(trialU, trial_sigma);
            if (new_norm < rnorm) break;
            lambda *= 0.5;
        }
        if (new_norm >= rnorm) {
            if (trace) *trace += "stalled at |res|=" + std::to_string(rnorm) + "; ";
            return rnorm;
        }
        U = trialU;
        sigma = trial_sigma;
        rnorm = new_norm;
        if (trace)
            *trace += "it" + std::to_string(it) + " |res|=" + std::to_string(rnorm) +
                      " sigma=" + std::to_string(sigma) + "; ";
    }
    return rnorm;
}

}  // namespace

RadialProfile solve_radial_profile(double rho, double r_max, double tol,
                                   const RadialOptions& opt) {
    if (!(rho > 0) || !(r_max > rho))
        throw Error("solve_radial_profile: need 0 < rho < r_max");
    const std::size_t n = static_cast<std::size_t>(opt.n_r) + 1;
    const double dr = r_max / static_cast<double>(opt.n_r);

    std::vector<double> U(n);
    std::string trace;

    // Newton on (U, sigma) with the radius pinned; the pin keeps the
    // interface from drifting, so the kink guess converges for any radius on
    // the droplet branch.  Warm-started continuation from larger radii
    // handles targets near the existence threshold.
    double sigma = std::min(0.4714 / rho, 0.8 * kSigmaFold);
    kink_guess(U, rho, sigma, dr);
    double res = newton_pinned(U, sigma, rho, dr, opt.tol, opt.max_newton, &trace);

    if (res > opt.tol) {
        double rho_c = std::max(2.0 * rho, 8.0);
        if (rho_c > r_max - 10.0) rho_c = 0.5 * (rho + r_max - 10.0);
        sigma = std::min(0.4714 / rho_c, 0.8 * kSigmaFold);
        kink_guess(U, rho_c, sigma, dr);
        res = newton_pinned(U, sigma, rho_c, dr, opt.tol, opt.max_newton, nullptr);
        int guard = 0;
        while (res <= opt.tol && rho_c > rho && guard++ < 200) {
            rho_c = std::max(rho, rho_c - 0.25);
            // shift the interface to the next pin radius
            std::vector<double> shifted(n);
            const double prev = zero_crossing(U, dr);
            for (std::size_t i = 0; i < n; ++i) {
                const double r = static_cast<double>(i) * dr + (prev - rho_c);
                const std::size_t j = static_cast<std::size_t>(
                    std::min(std::max(r, 0.0), r_max) / dr);
                shifted[i] = U[std::min(j, n - 1)];
            }
            U = shifted;
            res = newton_pinned(U, sigma, rho_c, dr, opt.tol, opt.max_newton, nullptr);
        }
        if (res > opt.tol || rho_c > rho)
            throw NoBracket("no droplet of radius " + std::to_string(rho) +
                            " on the monotone branch (stalled at radius " +
                            std::to_string(rho_c) + ", residual " + std::to_string(res) + ")");
    }
    if (!(sigma > 1e-9) || sigma >= kSigmaFold)
        throw NoBracket("sigma=" + std::to_string(sigma) + " left the admissible window");

    RadialProfile p;
    p.rho = zero_crossing(U, dr);
    p.sigma = sigma;
    p.alpha = far_field_root(sigma);
    p.nu = std::sqrt(fsecond(p.alpha));
    p.r_max = r_max;
    p.U = U;
    p.r.resize(n);
    for (std::size_t i = 0; i < n; ++i) p.r[i] = static_cast<double>(i) * dr;

    std::vector<double> resv;
    radial_residual(U, sigma, dr, resv);
    p.residual = sup_norm(resv);

    // Family derivative dU/dsigma: (lap_r - F''(U)) w = 1 with Neumann ends.
    {
        const double idr2 = 1.0 / (dr * dr);
        Tridiag J(n);
        J.di[0] = -4.0 * idr2 - fsecond(U[0]);
        J.up[0] = 4.0 * idr2;
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double r = static_cast<double>(i) * dr;
            J.lo[i] = idr2 - 1.0 / (2.0 * dr * r);
            J.di[i] = -2.0 * idr2 - fsecond(U[i]);
            J.up[i] = idr2 + 1.0 / (2.0 * dr * r);
        }
        J.lo[n - 1] = 2.0 * idr2;
        J.di[n - 1] = -2.0 * idr2 - fsecond(U[n - 1]);
        // J is the discrete (lap_r - F''(U)); solve J w = 1.
        std::vector<double> w(n, 1.0);
        solve_tridiag(J, w);

        p.u_spline = Spline(0.0, dr, U, 0.0, 0.0);
        const double u_r_at_rho = p.u_spline.deriv(p.rho);
        const Spline wsp(0.0, dr, w, 0.0, 0.0);
        const double w_at_rho = wsp(p.rho);
        if (std::abs(w_at_rho) < 1e-14)
            throw NoConvergence("degenerate family derivative at rho=" + std::to_string(rho));
        p.sigma_prime = -u_r_at_rho / w_at_rho;
        p.Urho.resize(n);
        for (std::size_t i = 0; i < n; ++i) p.Urho[i] = w[i] * p.sigma_prime;
        p.urho_spline = Spline(0.0, dr, p.Urho, 0.0, 0.0);
    }

    p.Ur.resize(n);
    for (std::size_t i = 0; i < n; ++i) p.Ur[i] = p.u_spline.deriv(p.r[i]);

    if (tol > 0 && p.residual > tol)
        throw NoConvergence("profile residual " + std::to_string(p.residual) +
                            " above requested tol");
    return p;
}

double empirical_min_radius(double r_max, double dr) {
    double lo = 0.0, hi = 4.0;
    // Find a solvable radius first, then bisect down to resolution dr.
    while (hi < r_max / 2) {
        try {
            solve_radial_profile(hi, r_max, 0.0);
            break;
        } catch (const Error&) {
            lo = hi;
            hi *= 2.0;
        }
    }
    while (hi - lo > dr) {
        const double mid = 0.5 * (lo + hi);
        try {
            solve_radial_profile(mid, r_max, 0.0);
            hi = mid;
        } catch (const Error&) {
            lo = mid;
        }
    }
    return hi;
}

void write_profile_csv(const RadialProfile& p, const std::string& csv_path,
                       const std::string& json_path) {
    std::FILE* fp = std::fopen(csv_path.c_str(), "wb");
    if (!fp) throw Error("cannot open " + csv_path);
    std::fprintf(fp, "r,U,Ur\n");
    for (std::size_t i = 0; i < p.r.size(); ++i)
        std::fprintf(fp, "%.17g,%.17g,%.17g\n", p.r[i], p.U[i], p.Ur[i]);
    std::fclose(fp);

    fp = std::fopen(json_path.c_str(), "wb");
    if (!fp) throw Error("cannot open " + json_path);
    std::fprintf(fp,
                 "{\n  \"rho\": %.17g,\n  \"sigma\": %.17g,\n  \"sigma_prime\": %.17g,\n"
                 "  \"alpha\": %.17g,\n  \"nu\": %.17g,\n  \"r_max\": %.17g,\n"
                 "  \"residual\": %.17g\n}\n",
                 p.rho, p.sigma, p.sigma_prime, p.alpha, p.nu, p.r_max, p.residual);
    std::fclose(fp);
}

}  // namespace droplab::radial
