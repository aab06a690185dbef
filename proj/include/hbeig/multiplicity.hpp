#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "hbeig/assembly.hpp"
#include "hbeig/geometry.hpp"
#include "hbeig/problems.hpp"
#include "hbeig/solver.hpp"

namespace hbeig {

enum class Verdict { at_least_na, not_na, inconclusive };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::at_least_na: return "at_least_na";
        case Verdict::not_na: return "not_na";
        case Verdict::inconclusive: return "inconclusive";
    }
    return "?";
}

struct MultiplicityReport {
    double lambda = 0.0;
    int n_anchors = 0;
    int n1 = 0;
    int n2 = 0;
    std::uint64_t seed = 0;
    double norm_sq1 = 0.0;
    double norm_sq2 = 0.0;
    /// |u^(n2)|_H / |u^(n1)|_H
    double ratio = 0.0;
    Verdict verdict = Verdict::inconclusive;
};

struct MultiplicityOptions {
    double cutoff = 1.25;
};

/// Verdict for a norm ratio: <= cutoff means bounded (multiplicity >= n_anchors).
inline Verdict classify_ratio(double ratio, double cutoff) {
    if (!std::isfinite(ratio)) return Verdict::inconclusive;
    return ratio <= cutoff ? Verdict::at_least_na : Verdict::not_na;
}

/// Random anchors: projected box samples and values with |b| in [0.5, 1.5] and random sign.
inline void random_anchors(const Shape& shape, int count, std::uint64_t seed,
                           std::vector<Vec3>& points, std::vector<double>& values) {
    std::mt19937_64 rng(derive_seed(seed, 2));
    points.clear();
    values.clear();
    while (static_cast<int>(points.size()) < count) {
        const auto batch = detail::projected_candidates(shape, static_cast<std::size_t>(count), rng);
        for (const Vec3& p : batch)
            if (static_cast<int>(points.size()) < count) points.push_back(p);
    }
    std::mt19937_64 vr(derive_seed(seed, 3));
    std::uniform_real_distribution<double> mag(0.5, 1.5);
    std::bernoulli_distribution sign(0.5);
    for (int j = 0; j < count; ++j) {
        const double m = mag(vr);
        values.push_back(sign(vr) ? m : -m);
    }
}

namespace detail {

/// C(lambda)^H restricted to the rows in `which`, one column per row.
inline CMatrix adjoint_rows(const RowBasis& rb, const std::vector<std::size_t>& which, double lambda,
                            std::int64_t chunk) {
    const std::int64_t nb = rb.basis_size();
    CMatrix z(static_cast<Eigen::Index>(nb), static_cast<Eigen::Index>(which.size()));
    CMatrix c;
    for (std::int64_t n0 = 0; n0 < nb; n0 += chunk) {
        const auto w = static_cast<Eigen::Index>(std::min(chunk, nb - n0));
        c.resize(z.cols(), w);
        rb.fill(which, n0, 2, lambda, c);
        z.middleRows(static_cast<Eigen::Index>(n0), w) = c.adjoint();
    }
    return z;
}

/// ||R^-H g||^2 for the R factor of z.
inline double qr_norm(const CMatrix& z, const CVector& g, double lambda) {
    const Eigen::HouseholderQR<CMatrix> qr(z);
    const Eigen::Index n = z.cols();
    const CMatrix r = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
    const double scale = r.diagonal().cwiseAbs().maxCoeff();
    if (!(scale > 0.0) || !(r.diagonal().cwiseAbs().minCoeff() > 1e-15 * scale))
        throw NumericError("multiplicity subsystem is numerically rank deficient", lambda, true);
    return r.adjoint().triangularView<Eigen::Lower>().solve(g).squaredNorm();
}

}  // namespace detail

/**
 * Norm-ratio multiplicity test on a closed surface at a fixed lambda.
 *
 * One greedy cloud of n2 points is generated; its first n1 points form the
 * smaller cloud, so the constraint sets are nested. Anchors are random
 * surface points; the anchor set for a smaller count is a prefix of the one
 * for a larger count. Norms come from QR factors of C(lambda)^H, not from
 * Phi, whose condition number is too large at these sizes.
 */
inline std::vector<MultiplicityReport> multiplicity_ratios(const ProblemSpec& problem, double lambda,
                                                           const std::vector<int>& anchor_counts,
                                                           int n1, int n2, std::uint64_t seed,
                                                           const MultiplicityOptions& opts = {},
                                                           const AssemblyOptions& asm_opts = {}) {
    if (problem.family != Family::lb_closed_surface)
        throw ConfigError("the multiplicity test is implemented for closed-surface problems");
    if (!(n2 > n1) || n1 < 1) throw ConfigError("multiplicity test needs 1 <= n1 < n2");
    if (anchor_counts.empty()) throw ConfigError("multiplicity test needs at least one anchor count");
    const int na_max = *std::max_element(anchor_counts.begin(), anchor_counts.end());
    if (*std::min_element(anchor_counts.begin(), anchor_counts.end()) < 1)
        throw ConfigError("n_anchors must be >= 1");
    if (!std::isfinite(lambda)) throw ConfigError("lambda must be finite");
    problem.basis_spec.validate();
    problem.weight_params.validate();

    const Shape shape = make_shape(problem.shape);
    CloudParams cp{n2, problem.candidate_multiplier, 0.0, seed, problem.use_curvature};
    const PointCloud cloud2 = generate_boundary_cloud(shape, cp);

    ProblemClouds clouds;
    clouds.interior = cloud2;
    random_anchors(shape, na_max, seed, clouds.anchors, clouds.anchor_values);
    ProblemSpec spec = problem;
    spec.n_points = n2;
    spec.n_anchors = na_max;
    const std::vector<ConstraintRow> rows = build_rows(spec, clouds);

    // Rows come as blocks of n2 per-point rows (one or two blocks), then anchors.
    // The n1-point rows P are QR-factored once and Q_P^H is applied to the rest.
    // Point rows have zero right-hand side, so for P + S the norm only needs the
    // R factor of S below the first |P| rows.
    const int blocks = problem.use_curvature ? 1 : 2;
    std::vector<std::size_t> p_rows, x_rows;
    for (int b = 0; b < blocks; ++b)
        for (int j = 0; j < n2; ++j) (j < n1 ? p_rows : x_rows).push_back(static_cast<std::size_t>(b * n2 + j));
    const std::size_t n_extra = x_rows.size();
    for (int a = 0; a < na_max; ++a) x_rows.push_back(static_cast<std::size_t>(blocks * n2 + a));

    const std::int64_t nb = problem.basis_spec.size();
    if (static_cast<std::int64_t>(rows.size()) > nb)
        throw NumericError("multiplicity test needs at most N_b rows; increase the basis size", lambda, true);
    const double bytes = static_cast<double>(nb) * static_cast<double>(rows.size()) * sizeof(cplx);
    if (bytes > static_cast<double>(asm_opts.memory_budget_bytes))
        throw ResourceError("multiplicity test exceeds the memory budget");
    const std::int64_t chunk = std::min<std::int64_t>(std::max<std::int64_t>(asm_opts.chunk, 1), nb);

    const detail::RowBasis rb(rows, problem.basis_spec, problem.weight_params);
    CMatrix zx = detail::adjoint_rows(rb, x_rows, lambda, chunk);
    {
        CMatrix zp = detail::adjoint_rows(rb, p_rows, lambda, chunk);
        const Eigen::HouseholderQR<Eigen::Ref<CMatrix>> qr(zp);
        zx.applyOnTheLeft(qr.householderQ().adjoint());
    }
    const auto k0 = static_cast<Eigen::Index>(p_rows.size());
    const Eigen::Index tail = static_cast<Eigen::Index>(nb) - k0;

    auto subsystem_norm = [&](bool all_points, int na) {
        std::vector<Eigen::Index> cols;
        if (all_points)
            for (std::size_t i = 0; i < n_extra; ++i) cols.push_back(static_cast<Eigen::Index>(i));
        for (int a = 0; a < na; ++a) cols.push_back(static_cast<Eigen::Index>(n_extra) + a);
        CMatrix s(tail, static_cast<Eigen::Index>(cols.size()));
        CVector gs(s.cols());
        for (Eigen::Index i = 0; i < s.cols(); ++i) {
            s.col(i) = zx.col(cols[i]).tail(tail);
            gs[i] = rows[x_rows[static_cast<std::size_t>(cols[i])]].rhs;
        }
        return detail::qr_norm(s, gs, lambda);
    };

    std::vector<MultiplicityReport> out;
    for (int na : anchor_counts) {
        MultiplicityReport r;
        r.lambda = lambda;
        r.n_anchors = na;
        r.n1 = n1;
        r.n2 = n2;
        r.seed = seed;
        r.norm_sq1 = subsystem_norm(false, na);
        r.norm_sq2 = subsystem_norm(true, na);
        r.ratio = std::sqrt(r.norm_sq2 / r.norm_sq1);
        r.verdict = classify_ratio(r.ratio, opts.cutoff);
        out.push_back(r);
    }
    return out;
}

inline MultiplicityReport multiplicity_ratio(const ProblemSpec& problem, double lambda, int n_anchors,
                                             int n1, int n2, std::uint64_t seed,
                                             const MultiplicityOptions& opts = {},
                                             const AssemblyOptions& asm_opts = {}) {
    return multiplicity_ratios(problem, lambda, {n_anchors}, n1, n2, seed, opts, asm_opts).front();
}

/// Nested size n2 ~ (10/9) n1.
inline int default_n2(int n1) { return static_cast<int>(std::lround(10.0 * n1 / 9.0)); }

}  // namespace hbeig
