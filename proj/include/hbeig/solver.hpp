#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <vector>

#include "hbeig/assembly.hpp"
#include "hbeig/common.hpp"

namespace hbeig {

/// N'(lambda), N''(lambda).
struct NormDerivatives {
    double d1 = 0.0;
    double d2 = 0.0;
};

/**
 * Factorization Phi(lambda) = W^H W with W upper triangular.
 *
 * gram systems: Cholesky of the assembled Phi(lambda), with one retry adding
 * jitter 1e-12 trace / R. orthogonal systems: W is the R factor of the small
 * coordinate matrix G(lambda) (see OrthogonalReduction), so Phi is never
 * formed.
 */
class PhiFactorization {
public:
    PhiFactorization(const AssembledSystem& sys, double lambda) : sys_(&sys), lambda_(lambda) {
        if (!std::isfinite(lambda)) throw ConfigError("lambda must be finite");
        if (sys.reduction)
            factor_orthogonal();
        else
            factor_gram(phi_at(sys, lambda));
    }

    double lambda() const { return lambda_; }
    double jitter() const { return jitter_; }

    /// W^{-H} rhs, so |half_solve(x)|^2 = x^H Phi^{-1} x.
    CVector half_solve(const CVector& rhs) const {
        if (!sys_->reduction) return llt_.matrixL().solve(rhs);
        CVector x = permute(rhs);
        w_.triangularView<Eigen::Upper>().adjoint().solveInPlace(x);
        return x;
    }

    /// Phi^{-1} rhs from the output of half_solve.
    CVector finish_solve(const CVector& half) const {
        if (!sys_->reduction) return llt_.matrixU().solve(half);
        const CVector x = w_.triangularView<Eigen::Upper>().solve(half);
        return unpermute(x);
    }

    CVector solve(const CVector& rhs) const { return finish_solve(half_solve(rhs)); }

    /// N' and N'' given beta = Phi^{-1} g and y = half_solve(g).
    NormDerivatives derivatives(const CVector& beta, const CVector& y) const {
        return sys_->reduction ? derivatives_orthogonal(beta, y) : derivatives_gram(beta);
    }

    /// Basis coefficients a = C(lambda)^H beta.
    CVector coefficients(const CVector& beta, const CVector& y, const AssemblyOptions& opts) const {
        if (!sys_->reduction) {
            if (sys_->rows.empty()) throw ConfigError("coefficients need the system's constraint rows");
            return hbeig::coefficients(sys_->rows, sys_->basis, sys_->weights, lambda_, beta, opts);
        }
        const OrthogonalReduction& red = *sys_->reduction;
        CVector full = CVector::Zero(red.z.rows());
        full.head(red.r.rows()) = coordinates(y);
        return red.qr->householderQ() * full;
    }

private:
    void factor_gram(const CMatrix& phi) {
        llt_.compute(phi);
        if (llt_.info() == Eigen::Success && finite_diag(llt_.matrixLLT())) return;
        const double tr = phi.diagonal().real().sum();
        jitter_ = 1e-12 * tr / static_cast<double>(phi.rows());
        CMatrix shifted = phi;
        shifted.diagonal().array() += jitter_;
        llt_.compute(shifted);
        if (llt_.info() == Eigen::Success && finite_diag(llt_.matrixLLT())) return;
        fail();
    }

    void factor_orthogonal() {
        const OrthogonalReduction& red = *sys_->reduction;
        const Eigen::Index ra = red.ra, rb = red.rb, n = ra + rb;
        w_ = CMatrix::Zero(n, n);
        w_.topLeftCorner(ra, ra) = red.r.topLeftCorner(ra, ra);
        if (rb > 0) {
            w_.topRightCorner(ra, rb) =
                red.r.block(0, ra, ra, rb) + lambda_ * red.r.block(0, ra + rb, ra, rb);
            qr_y_.compute(red.r.block(ra, ra, 2 * rb, rb) +
                          lambda_ * red.r.block(ra, ra + rb, 2 * rb, rb));
            w_.bottomRightCorner(rb, rb) =
                qr_y_.matrixQR().topRows(rb).triangularView<Eigen::Upper>();
        }
        if (!finite_diag(w_)) fail();
    }

    [[noreturn]] void fail() const {
        std::ostringstream msg;
        msg << "Phi(" << lambda_
            << ") is not numerically positive definite; increase the basis size or reduce points";
        throw NumericError(msg.str(), lambda_, true);
    }

    static bool finite_diag(const CMatrix& m) {
        double big = 0.0;
        for (Eigen::Index i = 0; i < m.rows(); ++i) big = std::max(big, std::abs(m(i, i)));
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            const double d = std::abs(m(i, i));
            if (!std::isfinite(d) || !(d > big * 1e-300)) return false;
        }
        return std::isfinite(big) && big > 0.0;
    }

    CVector permute(const CVector& x) const {
        const auto& order = sys_->reduction->order;
        CVector out(x.size());
        for (Eigen::Index k = 0; k < x.size(); ++k) out[k] = x[order[k]];
        return out;
    }
    CVector unpermute(const CVector& x) const {
        const auto& order = sys_->reduction->order;
        CVector out(x.size());
        for (Eigen::Index k = 0; k < x.size(); ++k) out[order[k]] = x[k];
        return out;
    }

    /// G(lambda) beta in the reduced coordinates, from y = W beta.
    CVector coordinates(const CVector& y) const {
        const OrthogonalReduction& red = *sys_->reduction;
        const Eigen::Index ra = red.ra, rb = red.rb;
        CVector v = CVector::Zero(ra + 2 * rb);
        v.head(ra) = y.head(ra);
        if (rb > 0) {
            v.tail(2 * rb).head(rb) = y.tail(rb);
            v.tail(2 * rb).applyOnTheLeft(qr_y_.householderQ());
        }
        return v;
    }

    NormDerivatives derivatives_gram(const CVector& beta) const {
        const CMatrix& p1 = sys_->phi1;
        const CMatrix& p2 = sys_->phi2;
        const CVector p2b = p2 * beta;
        const CVector mb = 2.0 * lambda_ * p2b + p1 * beta;
        NormDerivatives d;
        d.d1 = -beta.dot(mb).real();
        d.d2 = 2.0 * half_solve(mb).squaredNorm() - 2.0 * beta.dot(p2b).real();
        return d;
    }

    /**
     * With v = G beta, w = G1 beta and M = G1^H G + G^H G1:
     * N' = -2 Re(w^H v) and N'' = 2 |W^{-H} G1^H v + D^H w|^2 - 2 |w|^2, where
     * G = D W and D = diag(I, Q_Y) has orthonormal columns.
     */
    NormDerivatives derivatives_orthogonal(const CVector& beta, const CVector& y) const {
        const OrthogonalReduction& red = *sys_->reduction;
        const Eigen::Index ra = red.ra, rb = red.rb;
        NormDerivatives d;
        if (rb == 0) return d;
        const CVector bb = permute(beta).tail(rb);
        const CVector v = coordinates(y);
        const auto x1 = red.r.block(0, ra + rb, ra, rb);
        const auto y1 = red.r.block(ra, ra + rb, 2 * rb, rb);
        CVector w(ra + 2 * rb);
        w.head(ra) = x1 * bb;
        w.tail(2 * rb) = y1 * bb;
        d.d1 = -2.0 * w.dot(v).real();

        CVector t = CVector::Zero(ra + rb);
        t.tail(rb) = x1.adjoint() * v.head(ra) + y1.adjoint() * v.tail(2 * rb);
        w_.triangularView<Eigen::Upper>().adjoint().solveInPlace(t);
        CVector dw = w.tail(2 * rb);
        dw.applyOnTheLeft(qr_y_.householderQ().adjoint());
        t.head(ra) += w.head(ra);
        t.tail(rb) += dw.head(rb);
        d.d2 = 2.0 * t.squaredNorm() - 2.0 * w.squaredNorm();
        return d;
    }

    const AssembledSystem* sys_;
    double lambda_;
    double jitter_ = 0.0;
    Eigen::LLT<CMatrix, Eigen::Lower> llt_;
    CMatrix w_;
    Eigen::HouseholderQR<CMatrix> qr_y_;
};

struct SolveResult {
    double lambda = 0.0;
    CVector beta;
    /// N(lambda) = |u_lambda|_H^2 = Re(g^* beta), evaluated as |W^{-H} g|^2.
    double norm_sq = 0.0;
    /// Im(g^* beta); roundoff only.
    double norm_sq_imag = 0.0;
    double jitter = 0.0;
    std::optional<CVector> coeffs;
    /// max_j |(C(lambda) a)_j - g_j|, when coefficients were requested.
    std::optional<double> residual;
};

struct SolveOptions {
    bool want_coeffs = false;
    AssemblyOptions assembly;
};

namespace detail {

inline SolveResult solve_with(const AssembledSystem& sys, const PhiFactorization& f, CVector* half) {
    SolveResult res;
    res.lambda = f.lambda();
    CVector y = f.half_solve(sys.g);
    res.beta = f.finish_solve(y);
    res.jitter = f.jitter();
    res.norm_sq = y.squaredNorm();
    res.norm_sq_imag = sys.g.dot(res.beta).imag();
    if (half) *half = std::move(y);
    return res;
}

}  // namespace detail

inline SolveResult solve_at(const AssembledSystem& sys, double lambda, const SolveOptions& opts = {}) {
    if (!std::isfinite(lambda)) throw ConfigError("lambda must be finite");
    if (sys.g.isZero(0.0)) {
        SolveResult res;
        res.lambda = lambda;
        res.beta = CVector::Zero(sys.size());
        return res;
    }
    const PhiFactorization f(sys, lambda);
    CVector y;
    SolveResult res = detail::solve_with(sys, f, &y);
    if (opts.want_coeffs) {
        if (sys.rows.empty()) throw ConfigError("coefficients need the system's constraint rows");
        res.coeffs = f.coefficients(res.beta, y, opts.assembly);
        const CVector back = apply_rows(sys.rows, sys.basis, sys.weights, lambda, *res.coeffs,
                                        opts.assembly);
        res.residual = (back - sys.g).cwiseAbs().maxCoeff();
    }
    return res;
}

/**
 * N'(lambda) = -beta^* M beta and N''(lambda) = 2 beta^* M Phi^{-1} M beta
 * - 2 beta^* phi2 beta with M = 2 lambda phi2 + phi1.
 */
inline NormDerivatives norm_derivatives(const AssembledSystem& sys, double lambda,
                                        const SolveResult& solve,
                                        const PhiFactorization& factor) {
    if (solve.beta.isZero(0.0)) return {};
    (void)lambda;
    return factor.derivatives(solve.beta, factor.half_solve(sys.g));
}

inline NormDerivatives norm_derivatives(const AssembledSystem& sys, double lambda,
                                        const SolveResult& solve) {
    if (solve.beta.isZero(0.0)) return {};
    const PhiFactorization f(sys, lambda);
    return norm_derivatives(sys, lambda, solve, f);
}

/// N, N', N'' at one lambda with a single factorization.
struct NormSample {
    double lambda = 0.0;
    double norm_sq = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
};

inline NormSample sample_norm(const AssembledSystem& sys, double lambda) {
    NormSample s;
    s.lambda = lambda;
    if (sys.g.isZero(0.0)) return s;
    const PhiFactorization f(sys, lambda);
    CVector y;
    const SolveResult r = detail::solve_with(sys, f, &y);
    s.norm_sq = r.norm_sq;
    const NormDerivatives d = f.derivatives(r.beta, y);
    s.d1 = d.d1;
    s.d2 = d.d2;
    return s;
}

inline double norm_only(const AssembledSystem& sys, double lambda) {
    if (sys.g.isZero(0.0)) return 0.0;
    const PhiFactorization f(sys, lambda);
    return f.half_solve(sys.g).squaredNorm();
}

struct NewtonStep {
    int iter = 0;
    double lambda = 0.0;
    double norm_sq = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
    double step = 0.0;
};

struct NewtonResult {
    double lambda_star = 0.0;
    double norm_sq = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
    int iterations = 0;
    bool converged = false;
    bool is_minimum = false;
    std::vector<NewtonStep> history;
};

struct NewtonOptions {
    double tol = 1e-8;
    int max_iter = 50;
    int max_halvings = 8;
};

/**
 * Newton iteration lambda <- lambda - N'/N'' on the squared norm.
 *
 * A step is halved (at most max_halvings times) while it increases N. Where
 * N'' <= 0 the step -N'/|N''| is used so the iteration still moves downhill.
 * The run counts as converged once |step| <= tol and the final iterate has
 * N'' > 0.
 */
inline NewtonResult newton_search(const AssembledSystem& sys, double lambda0,
                                  const NewtonOptions& opts = {}) {
    if (!std::isfinite(lambda0)) throw ConfigError("Newton start must be finite");
    NewtonResult res;
    double lambda = lambda0;
    NormSample cur = sample_norm(sys, lambda);
    bool small_step = false;
    for (int it = 0; it < opts.max_iter; ++it) {
        if (cur.d1 == 0.0) {
            small_step = true;
            res.history.push_back({it, cur.lambda, cur.norm_sq, cur.d1, cur.d2, 0.0});
            break;
        }
        double step = cur.d2 > 0.0 ? -cur.d1 / cur.d2 : -cur.d1 / std::max(std::abs(cur.d2), 1e-300);
        if (!std::isfinite(step)) throw NumericError("non-finite Newton step", lambda, true);
        double trial_n = norm_only(sys, lambda + step);
        for (int h = 0; h < opts.max_halvings && trial_n > cur.norm_sq; ++h) {
            step *= 0.5;
            trial_n = norm_only(sys, lambda + step);
        }
        res.history.push_back({it, cur.lambda, cur.norm_sq, cur.d1, cur.d2, step});
        lambda += step;
        cur = sample_norm(sys, lambda);
        res.iterations = it + 1;
        if (std::abs(step) <= opts.tol) {
            small_step = true;
            break;
        }
    }
    res.lambda_star = lambda;
    res.norm_sq = cur.norm_sq;
    res.d1 = cur.d1;
    res.d2 = cur.d2;
    res.is_minimum = cur.d2 > 0.0;
    res.converged = small_step && res.is_minimum;
    res.history.push_back({res.iterations, cur.lambda, cur.norm_sq, cur.d1, cur.d2, 0.0});
    return res;
}

struct ScanPoint {
    double lambda = 0.0;
    double norm_sq = 0.0;
    double d1 = 0.0;
    bool ok = false;
};

/// N and N' at one lambda; a failed factorization gives ok = false.
inline ScanPoint scan_point(const AssembledSystem& sys, double lambda) {
    ScanPoint p;
    p.lambda = lambda;
    try {
        const NormSample s = sample_norm(sys, lambda);
        p.norm_sq = s.norm_sq;
        p.d1 = s.d1;
        p.ok = true;
    } catch (const NumericError&) {
        p.ok = false;
    }
    return p;
}

/// N and N' on a uniform grid of `steps` points over [lambda_min, lambda_max].
inline std::vector<ScanPoint> scan(const AssembledSystem& sys, double lambda_min,
                                   double lambda_max, int steps) {
    if (!(lambda_min < lambda_max)) throw ConfigError("scan needs lambda_min < lambda_max");
    if (steps < 2) throw ConfigError("scan needs at least 2 steps");
    std::vector<ScanPoint> out;
    out.reserve(static_cast<std::size_t>(steps));
    for (int i = 0; i < steps; ++i)
        out.push_back(scan_point(sys, lambda_min + (lambda_max - lambda_min) * i / (steps - 1)));
    return out;
}

/// Interior local minima of a scan (indices into the scan).
inline std::vector<std::size_t> scan_minima(const std::vector<ScanPoint>& pts) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
        if (!pts[i - 1].ok || !pts[i].ok || !pts[i + 1].ok) continue;
        if (pts[i].norm_sq < pts[i - 1].norm_sq && pts[i].norm_sq <= pts[i + 1].norm_sq)
            idx.push_back(i);
    }
    return idx;
}

/// u_lambda(x) = sum_n a_n d_n^{-1/2} exp(i omega_n . x) at each evaluation point.
inline std::vector<cplx> eigenfunction(const AssembledSystem& sys, const SolveResult& solve,
                                       const std::vector<Vec3>& eval_points,
                                       const AssemblyOptions& opts = {}) {
    CVector a;
    if (solve.coeffs) {
        a = *solve.coeffs;
    } else {
        const PhiFactorization f(sys, solve.lambda);
        a = f.coefficients(solve.beta, f.half_solve(sys.g), opts);
    }
    std::vector<ConstraintRow> probes;
    probes.reserve(eval_points.size());
    for (const Vec3& x : eval_points)
        probes.push_back({x, OperatorSymbol::identity(), OperatorSymbol{}, cplx(0.0), RowTag::interior});
    const CVector v = apply_rows(probes, sys.basis, sys.weights, 0.0, a, opts);
    return {v.data(), v.data() + v.size()};
}

}  // namespace hbeig
