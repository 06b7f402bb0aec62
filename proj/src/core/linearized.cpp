#include "droplab/linearized.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "droplab/errors.hpp"
#include "droplab/kernels.hpp"
#include "droplab/rng.hpp"
#include "droplab/spectral.hpp"

namespace droplab::linop {

using spectral::Transform;

namespace {

Field fpp_of(const Field& u) {
    Field f(u.grid);
    for (std::size_t i = 0; i < u.size(); ++i) f.v[i] = 3.0 * u.v[i] * u.v[i] - 1.0;
    return f;
}

void require_zero_mean(const Field& v, const char* who) {
    const double m = spectral::mean(v);
    const double l2 = spectral::norm_l2(v);
    if (std::abs(m) > 1e-10 * (l2 > 0 ? l2 : 1.0))
        throw NonzeroMean(std::string(who) + ": |mean| = " + std::to_string(std::abs(m)));
}

}  // namespace

Linearization Linearization::around(const droplet::DropletState& d) {
    Linearization lin;
    lin.grid = d.field.grid;
    lin.eps = d.eps;
    lin.fpp = fpp_of(d.field);
    return lin;
}

Field Linearization::apply_cahn_hilliard(const Field& v) const {
    require_zero_mean(v, "apply_cahn_hilliard");
    const Transform& t = Transform::get(grid);
    SpectralCoeffs c = t.forward(v);
    // w = -eps^2 lap v + F'' v
    SpectralCoeffs lap_c(grid);
    for (std::size_t i = 0; i < c.size(); ++i) lap_c.c[i] = -t.mu()[i] * c.c[i];
    Field lap_v = t.inverse(lap_c);
    Field w(grid);
    for (std::size_t i = 0; i < w.size(); ++i)
        w.v[i] = -eps * eps * lap_v.v[i] + fpp.v[i] * v.v[i];
    SpectralCoeffs wc = t.forward(w);
    for (std::size_t i = 0; i < wc.size(); ++i) wc.c[i] *= -t.mu()[i];
    return t.inverse(wc);
}

Field Linearization::apply_allen_cahn(const Field& v) const {
    require_zero_mean(v, "apply_allen_cahn");
    const Transform& t = Transform::get(grid);
    SpectralCoeffs c = t.forward(v);
    for (std::size_t i = 0; i < c.size(); ++i) c.c[i] *= -t.mu()[i];
    Field lap_v = t.inverse(c);
    Field out(grid);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.v[i] = eps * eps * lap_v.v[i] - fpp.v[i] * v.v[i];
    const double m = spectral::mean(out);
    for (double& x : out.v) x -= m;
    return out;
}

namespace {

// S = eps^2 mu^2 + sqrt(mu) F'' sqrt(mu) in coefficient space.
class SymmetrizedCH final : public CoeffOp {
  public:
    SymmetrizedCH(const droplet::DropletState& d)
        : grid_(d.field.grid), eps2_(d.eps * d.eps), fpp_(fpp_of(d.field)),
          t_(&Transform::get(grid_)) {
        const std::size_t n = grid_.size();
        diag_.resize(n);
        const double mbar = std::max(spectral::mean(fpp_), 0.5);
        for (std::size_t i = 0; i < n; ++i) {
            const double mu = t_->mu()[i];
            diag_[i] = eps2_ * mu * mu + mbar * mu;
        }
        shift_scale_ = d.eps;
        tmp_c_.grid = grid_;
        tmp_c_.c.resize(n);
        tmp_f_.grid = grid_;
        tmp_f_.v.resize(n);
        // tangents in phi coordinates: (u~_j)^ / sqrt(mu)
        for (int j = 0; j < 2; ++j) {
            const SpectralCoeffs th = t_->forward(d.tangent[j]);
            avector w(n, 0.0);
            for (std::size_t i = 1; i < n; ++i) w[i] = th.c[i] / t_->sqrt_mu()[i];
            null_basis_.push_back(std::move(w));
        }
    }

    void apply(const avector& in, avector& out) const override {
        const std::size_t n = in.size();
        out.resize(n);
        kernels::multiply(t_->sqrt_mu().data(), in.data(), tmp_c_.data(), n);
        t_->inverse(tmp_c_, tmp_f_);
        for (std::size_t i = 0; i < n; ++i) tmp_f_.v[i] *= fpp_.v[i];
        t_->forward(tmp_f_, tmp_c_);
        for (std::size_t i = 0; i < n; ++i) {
            const double mu = t_->mu()[i];
            out[i] = eps2_ * mu * mu * in[i] + t_->sqrt_mu()[i] * tmp_c_.c[i];
        }
        out[0] = 0.0;
    }

    const avector& precond_diag() const override { return diag_; }
    Grid grid() const override { return grid_; }
    const std::vector<avector>& near_null_basis() const override { return null_basis_; }
    double shift_scale() const { return shift_scale_; }

  private:
    Grid grid_;
    double eps2_;
    Field fpp_;
    const Transform* t_;
    avector diag_;
    double shift_scale_;
    std::vector<avector> null_basis_;
    mutable SpectralCoeffs tmp_c_;
    mutable Field tmp_f_;
};

// T = eps^2 mu + P F'' on the zero-mean subspace.
class MassConservingAC final : public CoeffOp {
  public:
    MassConservingAC(const droplet::DropletState& d)
        : grid_(d.field.grid), eps2_(d.eps * d.eps), fpp_(fpp_of(d.field)),
          t_(&Transform::get(grid_)) {
        const std::size_t n = grid_.size();
        diag_.resize(n);
        const double mbar = std::max(spectral::mean(fpp_), 0.5);
        for (std::size_t i = 0; i < n; ++i) diag_[i] = eps2_ * t_->mu()[i] + mbar;
        shift_scale_ = d.eps * d.eps;
        tmp_c_.grid = grid_;
        tmp_c_.c.resize(n);
        tmp_f_.grid = grid_;
        tmp_f_.v.resize(n);
        for (int j = 0; j < 2; ++j) {
            const SpectralCoeffs th = t_->forward(d.tangent[j]);
            avector w(th.c.begin(), th.c.end());
            w[0] = 0.0;
            null_basis_.push_back(std::move(w));
        }
    }

    void apply(const avector& in, avector& out) const override {
        const std::size_t n = in.size();
        out.resize(n);
        std::copy(in.begin(), in.end(), tmp_c_.c.begin());
        tmp_c_.c[0] = 0.0;
        t_->inverse(tmp_c_, tmp_f_);
        for (std::size_t i = 0; i < n; ++i) tmp_f_.v[i] *= fpp_.v[i];
        t_->forward(tmp_f_, tmp_c_);
        for (std::size_t i = 0; i < n; ++i)
            out[i] = eps2_ * t_->mu()[i] * in[i] + tmp_c_.c[i];
        out[0] = 0.0;
    }

    const avector& precond_diag() const override { return diag_; }
    Grid grid() const override { return grid_; }
    const std::vector<avector>& near_null_basis() const override { return null_basis_; }
    double shift_scale() const { return shift_scale_; }

  private:
    Grid grid_;
    double eps2_;
    Field fpp_;
    const Transform* t_;
    avector diag_;
    double shift_scale_;
    std::vector<avector> null_basis_;
    mutable SpectralCoeffs tmp_c_;
    mutable Field tmp_f_;
};

double suggested_shift(const CoeffOp& op) {
    // must exceed |lambda_1| (boundary-splitting scale) so op + s stays SPD
    if (auto* p = dynamic_cast<const SymmetrizedCH*>(&op))
        return std::max(0.25 * p->shift_scale(), 0.08);
    if (auto* p = dynamic_cast<const MassConservingAC*>(&op))
        return std::max(0.25 * p->shift_scale(), 0.01);
    return 1e-3;
}

double vdot(const avector& a, const avector& b) {
    return kernels::dot(a.data(), b.data(), a.size());
}

void vaxpy(double a, const avector& x, avector& y) {
    kernels::axpy(a, x.data(), y.data(), y.size());
}

void orthogonalize_against(avector& w, const std::vector<avector>& basis) {
    for (int pass = 0; pass < 2; ++pass)
        for (const avector& v : basis) vaxpy(-vdot(w, v), v, w);
}

// Deflated preconditioned CG for A = op + s I.  The coarse space W (the
// droplet tangents plus any converged eigenvectors) carries the near-null
// directions the diagonal preconditioner cannot see; the Galerkin solve on W
// plus A-orthogonal projection of every search direction keeps CG on the
// well-conditioned complement.
class DeflatedCG {
  public:
    DeflatedCG(const CoeffOp& op, double s, const std::vector<avector>& extra)
        : op_(op), s_(s) {
        const std::size_t n = op.grid().size();
        auto add = [&](avector w) {
            w[0] = 0.0;
            orthogonalize_against(w, W_);
            const double nw = std::sqrt(vdot(w, w));
            if (nw < 1e-8) return;
            for (double& x : w) x /= nw;
            W_.push_back(std::move(w));
        };
        for (const avector& w : op.near_null_basis()) add(w);
        for (const avector& w : extra) add(w);
        const std::size_t k = W_.size();
        AW_.resize(k);
        E_.assign(k * k, 0.0);
        for (std::size_t j = 0; j < k; ++j) {
            AW_[j].resize(n);
            apply_shifted(W_[j], AW_[j]);
        }
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j) E_[i * k + j] = vdot(W_[i], AW_[j]);
        factor();
    }

    void apply_shifted(const avector& in, avector& out) const {
        op_.apply(in, out);
        vaxpy(s_, in, out);
        out[0] = 0.0;
    }

    // x (overwritten) solves (op + s) x = b; returns iterations used.
    int solve(const avector& b, avector& x, double tol, int max_iter) const {
        const std::size_t n = b.size();
        const avector& d = op_.precond_diag();
        const std::size_t k = W_.size();
        std::vector<double> c(k);

        x.assign(n, 0.0);
        for (std::size_t j = 0; j < k; ++j) c[j] = vdot(W_[j], b);
        esolve(c);
        for (std::size_t j = 0; j < k; ++j) vaxpy(c[j], W_[j], x);

        avector r = b, q(n), z(n), p(n);
        r[0] = 0.0;
        for (std::size_t j = 0; j < k; ++j) vaxpy(-c[j], AW_[j], r);
        const double bnorm = std::sqrt(vdot(b, b));
        if (bnorm == 0.0) return 0;

        auto precondition_project = [&](const avector& rr, avector& zz) {
            for (std::size_t i = 0; i < n; ++i) zz[i] = rr[i] / (d[i] + s_);
            zz[0] = 0.0;
            for (std::size_t j = 0; j < k; ++j) c[j] = vdot(AW_[j], zz);
            esolve(c);
            for (std::size_t j = 0; j < k; ++j) vaxpy(-c[j], W_[j], zz);
        };

        precondition_project(r, z);
        p = z;
        double rz = vdot(r, z);
        int it = 0;
        for (; it < max_iter; ++it) {
            if (std::sqrt(vdot(r, r)) < tol * bnorm) break;
            apply_shifted(p, q);
            const double pq = vdot(p, q);
            if (!(pq > 0)) break;  // numerically indefinite; accept current x
            const double alpha = rz / pq;
            vaxpy(alpha, p, x);
            vaxpy(-alpha, q, r);
            precondition_project(r, z);
            const double rz_new = vdot(r, z);
            const double beta = rz_new / rz;
            rz = rz_new;
            for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
        }
        return it;
    }

  private:
    void factor() {
        // dense LU with partial pivoting on the k x k Galerkin matrix
        const std::size_t k = W_.size();
        lu_ = E_;
        piv_.resize(k);
        for (std::size_t i = 0; i < k; ++i) piv_[i] = i;
        for (std::size_t col = 0; col < k; ++col) {
            std::size_t best = col;
            for (std::size_t r = col + 1; r < k; ++r)
                if (std::abs(lu_[r * k + col]) > std::abs(lu_[best * k + col])) best = r;
            if (best != col) {
                for (std::size_t j = 0; j < k; ++j)
                    std::swap(lu_[col * k + j], lu_[best * k + j]);
                std::swap(piv_[col], piv_[best]);
            }
            if (std::abs(lu_[col * k + col]) < 1e-300)
                throw Singular("deflation Galerkin matrix is singular");
            for (std::size_t r = col + 1; r < k; ++r) {
                const double f = lu_[r * k + col] / lu_[col * k + col];
                lu_[r * k + col] = f;
                for (std::size_t j = col + 1; j < k; ++j)
                    lu_[r * k + j] -= f * lu_[col * k + j];
            }
        }
    }

    void esolve(std::vector<double>& rhs) const {
        const std::size_t k = W_.size();
        std::vector<double> b(k);
        for (std::size_t i = 0; i < k; ++i) b[i] = rhs[piv_[i]];
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < i; ++j) b[i] -= lu_[i * k + j] * b[j];
        for (std::size_t i = k; i-- > 0;) {
            for (std::size_t j = i + 1; j < k; ++j) b[i] -= lu_[i * k + j] * b[j];
            b[i] /= lu_[i * k + i];
        }
        rhs = b;
    }

    const CoeffOp& op_;
    double s_;
    std::vector<avector> W_;
    std::vector<avector> AW_;
    std::vector<double> E_, lu_;
    std::vector<std::size_t> piv_;
};

// One shift-invert Lanczos pass on the orthogonal complement of `deflate`,
// returning the smallest remaining eigenpair of op.
EigenPair lanczos_pass(const CoeffOp& op, double s, const std::vector<avector>& deflate,
                       const DeflatedCG& solver, const EigenOptions& opt) {
    const std::size_t n = op.grid().size();
    std::vector<avector> V;
    std::vector<double> alpha, beta;

    avector v(n);
    {
        // Deterministic start vector, smooth in the mode index: high-mode
        // content in the Ritz combination gets amplified by ||S|| ~ mu_max^2
        // when forming residuals, so a white start sets a residual floor.
        rng::NormalStream ns(0x5eedULL, rng::Stream::test_fields, 0);
        const avector& mu = Transform::get(op.grid()).mu();
        for (std::size_t i = 0; i < n; ++i)
            v[i] = ns.normal(7, static_cast<std::uint32_t>(i)) / (1.0 + mu[i]);
        v[0] = 0.0;
        orthogonalize_against(v, deflate);
        const double nv = std::sqrt(vdot(v, v));
        for (double& x : v) x /= nv;
    }
    V.push_back(v);

    avector w(n), phi(n), Sphi(n);
    EigenPair best;
    best.residual = 1e300;

    for (int k = 0; k < opt.max_lanczos; ++k) {
        solver.solve(V[k], w, opt.cg_tol, opt.cg_max);
        orthogonalize_against(w, deflate);
        const double a_k = vdot(w, V[k]);
        alpha.push_back(a_k);
        vaxpy(-a_k, V[k], w);
        if (k > 0) vaxpy(-beta[k - 1], V[k - 1], w);
        orthogonalize_against(w, V);
        const double b_k = std::sqrt(vdot(w, w));

        // Ritz extraction every few steps once the subspace has content.
        if (k >= 2 && (k % 3 == 0 || b_k < 1e-14 || k == opt.max_lanczos - 1)) {
            const int m = k + 1;
            Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
            for (int i = 0; i < m; ++i) {
                T(i, i) = alpha[i];
                if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta[i];
            }
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
            // largest theta of the inverse operator = smallest lambda
            const Eigen::VectorXd y = es.eigenvectors().col(m - 1);
            std::fill(phi.begin(), phi.end(), 0.0);
            for (int i = 0; i < m; ++i) vaxpy(y[i], V[i], phi);
            orthogonalize_against(phi, deflate);
            const double np = std::sqrt(vdot(phi, phi));
            for (double& x : phi) x /= np;
            op.apply(phi, Sphi);
            const double lambda = vdot(phi, Sphi);
            avector res = Sphi;
            vaxpy(-lambda, phi, res);
            const double rn = std::sqrt(vdot(res, res));
            if (rn < best.residual) {
                best.lambda = lambda;
                best.residual = rn;
                best.phi = phi;
            }
            // relative tolerance with an absolute floor of 1
            if (best.residual < opt.tol * std::max(1.0, std::abs(best.lambda))) return best;
        }
        if (b_k < 1e-14) break;  // Krylov space exhausted
        beta.push_back(b_k);
        for (double& x : w) x /= b_k;
        V.push_back(w);
    }
    if (best.residual < opt.tol * std::max(1.0, std::abs(best.lambda))) return best;
    throw NoConvergence("lanczos pass: residual " + std::to_string(best.residual) +
                        " after " + std::to_string(opt.max_lanczos) +
                        " iterations (tol " + std::to_string(opt.tol) + ")");
}

}  // namespace

std::unique_ptr<CoeffOp> make_symmetrized_ch(const droplet::DropletState& d) {
    return std::make_unique<SymmetrizedCH>(d);
}

std::unique_ptr<CoeffOp> make_mass_conserving_ac(const droplet::DropletState& d) {
    return std::make_unique<MassConservingAC>(d);
}

std::vector<EigenPair> smallest_eigenpairs(const CoeffOp& op, int count,
                                           const EigenOptions& opt) {
    double s = (opt.shift > 0) ? opt.shift : suggested_shift(op);
    std::vector<EigenPair> pairs;
    std::vector<avector> deflate;
    for (int j = 0; j < count; ++j) {
        // converged eigenvectors join the CG coarse space for later passes;
        // a failed pass escalates the shift (op + s must stay positive)
        EigenPair p;
        for (int attempt = 0;; ++attempt) {
            try {
                const DeflatedCG solver(op, s, deflate);
                p = lanczos_pass(op, s, deflate, solver, opt);
                break;
            } catch (const NoConvergence&) {
                if (attempt >= 2) throw;
                s *= 4.0;
            }
        }
        deflate.push_back(p.phi);
        pairs.push_back(std::move(p));
    }
    std::sort(pairs.begin(), pairs.end(),
              [](const EigenPair& a, const EigenPair& b) { return a.lambda < b.lambda; });
    return pairs;
}

std::vector<double> allen_cahn_eigenvalues(const droplet::DropletState& d, int count,
                                           const EigenOptions& opt) {
    auto op = make_mass_conserving_ac(d);
    auto pairs = smallest_eigenpairs(*op, count, opt);
    std::vector<double> mu;
    for (const auto& p : pairs) mu.push_back(p.lambda);
    return mu;
}

namespace {

// 2x2 helpers
using Mat2 = std::array<std::array<double, 2>, 2>;

Mat2 mat2_mul(const Mat2& A, const Mat2& B) {
    Mat2 C{};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) C[i][j] = A[i][0] * B[0][j] + A[i][1] * B[1][j];
    return C;
}

// Orthonormalize two coefficient vectors under the plain dot product;
// returns false if they are numerically dependent.
bool orthonormalize2(avector& a, avector& b) {
    double na = std::sqrt(vdot(a, a));
    if (na < 1e-300) return false;
    for (double& x : a) x /= na;
    vaxpy(-vdot(b, a), a, b);
    double nb = std::sqrt(vdot(b, b));
    if (nb < 1e-12) return false;
    for (double& x : b) x /= nb;
    return true;
}

// smallest singular value of a 2x2 matrix
double smin2(double m11, double m12, double m21, double m22) {
    const double a = m11 * m11 + m12 * m12 + m21 * m21 + m22 * m22;
    const double det = m11 * m22 - m12 * m21;
    const double disc = std::sqrt(std::max(a * a - 4.0 * det * det, 0.0));
    return std::sqrt(std::max(0.5 * (a - disc), 0.0));
}

}  // namespace

double subspace_distance(const std::array<SpectralCoeffs, 2>& span_hat,
                         const std::array<SpectralCoeffs, 2>& against_hat) {
    // Map psi-style coefficients to phi coordinates (divide by sqrt(mu)),
    // where the H^-1 inner product is the plain dot.
    const Transform& t = Transform::get(span_hat[0].grid);
    const std::size_t n = span_hat[0].size();
    auto to_phi = [&](const SpectralCoeffs& c) {
        avector p(n, 0.0);
        for (std::size_t i = 1; i < n; ++i) p[i] = c.c[i] / t.sqrt_mu()[i];
        return p;
    };
    avector e1 = to_phi(span_hat[0]), e2 = to_phi(span_hat[1]);
    avector f1 = to_phi(against_hat[0]), f2 = to_phi(against_hat[1]);
    if (!orthonormalize2(e1, e2) || !orthonormalize2(f1, f2))
        throw IllConditioned("subspace_distance: degenerate span");
    const double s = smin2(vdot(e1, f1), vdot(e1, f2), vdot(e2, f1), vdot(e2, f2));
    return std::sqrt(std::max(0.0, 1.0 - s * s));
}

double tangent_alignment(const EigenStructure& es, const droplet::DropletState& d) {
    const Transform& t = Transform::get(d.field.grid);
    std::array<SpectralCoeffs, 2> tan_hat{t.forward(d.tangent[0]), t.forward(d.tangent[1])};
    std::array<SpectralCoeffs, 2> psi_hat{es.psi_hat[0], es.psi_hat[1]};
    return subspace_distance(tan_hat, psi_hat);
}

void coefficient_matrices(EigenStructure& es, const droplet::DropletState& d) {
    const Transform& t = Transform::get(d.field.grid);
    std::array<SpectralCoeffs, 2> tan_hat{t.forward(d.tangent[0]), t.forward(d.tangent[1])};
    const double n1 = spectral::norm_hm1(tan_hat[0]);
    const double n2 = spectral::norm_hm1(tan_hat[1]);
    const double g12 = spectral::inner_hm1(tan_hat[0], tan_hat[1]) / (n1 * n2);
    const double cond = (1.0 + std::abs(g12)) / std::max(1.0 - std::abs(g12), 1e-300);
    if (cond > 1e6)
        throw IllConditioned("tangent Gram condition " + std::to_string(cond));

    // a_ij from least squares of psi_i on the normalized tangents.
    for (int i = 0; i < 2; ++i) {
        const double r1 = spectral::inner_hm1(es.psi_hat[i], tan_hat[0]) / n1;
        const double r2 = spectral::inner_hm1(es.psi_hat[i], tan_hat[1]) / n2;
        const double det = 1.0 - g12 * g12;
        es.a[i][0] = (r1 - g12 * r2) / det;
        es.a[i][1] = (r2 - g12 * r1) / det;
    }
    for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k)
            es.B[j][k] = spectral::inner_hm1(tan_hat[j], es.psi_hat[k]);

    // Givens rotation with <u~_1, psibar_2> = 0 (row-space alignment).
    const double r = std::hypot(es.B[0][0], es.B[0][1]);
    const double c = (r > 0) ? es.B[0][0] / r : 1.0;
    const double sgn = (r > 0) ? es.B[0][1] / r : 0.0;
    es.Q = Mat2{{{c, sgn}, {-sgn, c}}};

    es.psi_bar_hat.assign(2, SpectralCoeffs(d.field.grid));
    for (int k = 0; k < 2; ++k)
        for (std::size_t p = 0; p < es.psi_hat[0].size(); ++p)
            es.psi_bar_hat[k].c[p] =
                es.Q[k][0] * es.psi_hat[0].c[p] + es.Q[k][1] * es.psi_hat[1].c[p];
}

EigenStructure leading_eigenpairs(const droplet::DropletState& d, int count,
                                  const EigenOptions& opt) {
    if (count < 3) throw Error("leading_eigenpairs: count >= 3 required");
    auto op = make_symmetrized_ch(d);
    auto pairs = smallest_eigenpairs(*op, count, opt);

    const Transform& t = Transform::get(d.field.grid);
    EigenStructure es;
    es.eps = d.eps;
    for (const auto& p : pairs) {
        es.lambda.push_back(p.lambda);
        es.max_residual = std::max(es.max_residual, p.residual);
    }
    // store the eigenfields for the small subspace (all returned pairs)
    for (const auto& p : pairs) {
        SpectralCoeffs psi_hat(d.field.grid);
        kernels::multiply(t.sqrt_mu().data(), p.phi.data(), psi_hat.data(), p.phi.size());
        es.psi.push_back(t.inverse(psi_hat));
        es.psi_hat.push_back(std::move(psi_hat));
    }
    es.dbar = tangent_alignment(es, d);
    coefficient_matrices(es, d);
    return es;
}

void align_pair_to_base(std::array<SpectralCoeffs, 2>& pair,
                        const std::array<SpectralCoeffs, 2>& base) {
    // Overlap matrix M_ab = <pair_a, base_b>, orthogonal Procrustes factor
    // R = M (M^T M)^{-1/2}; aligned_b = sum_a pair_a R_ab.
    double M[2][2];
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            M[a][b] = kernels::dot(pair[a].data(), base[b].data(), pair[a].size());
    const double p = M[0][0] * M[0][0] + M[1][0] * M[1][0];
    const double q = M[0][0] * M[0][1] + M[1][0] * M[1][1];
    const double r = M[0][1] * M[0][1] + M[1][1] * M[1][1];
    // inverse square root of S = [[p,q],[q,r]]
    const double det = p * r - q * q;
    if (det <= 0) throw IllConditioned("align_pair_to_base: rank-deficient overlap");
    const double sdet = std::sqrt(det);
    const double tr = p + r;
    const double denom = std::sqrt(tr + 2.0 * sdet);
    // S^{1/2} = (S + sdet I)/denom; invert it
    const double s11 = (p + sdet) / denom, s12 = q / denom, s22 = (r + sdet) / denom;
    const double idet = 1.0 / (s11 * s22 - s12 * s12);
    const double i11 = s22 * idet, i12 = -s12 * idet, i22 = s11 * idet;
    double R[2][2] = {{M[0][0] * i11 + M[0][1] * i12, M[0][0] * i12 + M[0][1] * i22},
                      {M[1][0] * i11 + M[1][1] * i12, M[1][0] * i12 + M[1][1] * i22}};
    std::array<SpectralCoeffs, 2> out{pair[0], pair[1]};
    const std::size_t n = pair[0].size();
    for (int b = 0; b < 2; ++b)
        for (std::size_t i = 0; i < n; ++i)
            out[b].c[i] = pair[0].c[i] * R[0][b] + pair[1].c[i] * R[1][b];
    pair = std::move(out);
}

EigenDerivatives eigen_derivatives(const droplet::DropletFamily& fam, Vec2 xi,
                                   const EigenStructure& base, double h,
                                   bool with_second, const EigenOptions& opt) {
    const Grid g = fam.grid;
    std::array<SpectralCoeffs, 2> base_pair{base.psi_hat[0], base.psi_hat[1]};

    auto solve_at = [&](Vec2 p) {
        droplet::DropletState d = fam.build(p);
        auto op = make_symmetrized_ch(d);
        auto pairs = smallest_eigenpairs(*op, 2, opt);
        const Transform& t = Transform::get(g);
        std::array<SpectralCoeffs, 2> out{SpectralCoeffs(g), SpectralCoeffs(g)};
        for (int i = 0; i < 2; ++i)
            kernels::multiply(t.sqrt_mu().data(), pairs[i].phi.data(), out[i].data(),
                              pairs[i].phi.size());
        align_pair_to_base(out, base_pair);
        return out;
    };

    EigenDerivatives der;
    der.h = h;
    const std::array<Vec2, 2> e{Vec2{1.0, 0.0}, Vec2{0.0, 1.0}};
    std::array<std::array<SpectralCoeffs, 2>, 2> plus, minus;
    for (int j = 0; j < 2; ++j) {
        plus[j] = solve_at(xi + e[j] * h);
        minus[j] = solve_at(xi - e[j] * h);
        for (int i = 0; i < 2; ++i) {
            der.dpsi[i][j] = SpectralCoeffs(g);
            for (std::size_t p = 0; p < g.size(); ++p)
                der.dpsi[i][j].c[p] =
                    (plus[j][i].c[p] - minus[j][i].c[p]) / (2.0 * h);
        }
    }
    if (with_second) {
        der.has_second = true;
        auto pp = solve_at(xi + (e[0] + e[1]) * h);
        auto pm = solve_at(xi + (e[0] - e[1]) * h);
        auto mp = solve_at(xi - (e[0] - e[1]) * h);
        auto mm = solve_at(xi - (e[0] + e[1]) * h);
        for (int i = 0; i < 2; ++i) {
            for (int jk = 0; jk < 3; ++jk) der.d2psi[i][jk] = SpectralCoeffs(g);
            for (std::size_t p = 0; p < g.size(); ++p) {
                const double b0 = base_pair[i].c[p];
                der.d2psi[i][0].c[p] =
                    (plus[0][i].c[p] - 2.0 * b0 + minus[0][i].c[p]) / (h * h);
                der.d2psi[i][2].c[p] =
                    (plus[1][i].c[p] - 2.0 * b0 + minus[1][i].c[p]) / (h * h);
                der.d2psi[i][1].c[p] =
                    (pp[i].c[p] - pm[i].c[p] - mp[i].c[p] + mm[i].c[p]) / (4.0 * h * h);
            }
        }
    }
    return der;
}

}  // namespace droplab::linop
