#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hbeig/solver.hpp"

using namespace hbeig;

namespace {

// Rows C0 = [[1,0,0],[-c,1,0]], C1 = [[0,0,0],[1,0,0]] give
// Phi(lambda) = [[1, lambda-c], [lambda-c, (lambda-c)^2 + 1]] and, with g = (1, 0),
// N(lambda) = (lambda - c)^2 + 1.
AssembledSystem parabola_system(double c) {
    CMatrix c0(2, 3), c1(2, 3);
    c0 << 1.0, 0.0, 0.0, -c, 1.0, 0.0;
    c1 << 0.0, 0.0, 0.0, 1.0, 0.0, 0.0;
    AssembledSystem s;
    s.phi0 = c0 * c0.adjoint();
    s.phi1 = c0 * c1.adjoint() + c1 * c0.adjoint();
    s.phi2 = c1 * c1.adjoint();
    s.g = CVector::Zero(2);
    s.g[0] = 1.0;
    return s;
}

BasisSpec basis_2d(int k) {
    BasisSpec b;
    b.dims = 2;
    b.max_index = k;
    b.side_lengths = {4.0, 4.0, 1.0};
    return b;
}

// A small unit-disk Steklov-type system: Laplace rows inside, (d_n - lambda) rows on the circle.
std::vector<ConstraintRow> disk_rows(int n_in, int n_bd, double anchor_value = 1.0) {
    std::vector<ConstraintRow> rows;
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-0.8, 0.8);
    for (int i = 0; i < n_in; ++i) {
        Vec3 x;
        do x = Vec3(u(rng), u(rng), 0.0);
        while (x.norm() > 0.85);
        rows.push_back({x, OperatorSymbol::laplacian(), OperatorSymbol{}, cplx(0.0), RowTag::interior});
    }
    for (int i = 0; i < n_bd; ++i) {
        const double a = 2.0 * M_PI * i / n_bd;
        const Vec3 n(std::cos(a), std::sin(a), 0.0);
        rows.push_back({n, OperatorSymbol::gradient_dir(n), -OperatorSymbol::identity(), cplx(0.0),
                        RowTag::boundary});
    }
    rows.push_back(ConstraintRow::anchor(Vec3(1, 0, 0), anchor_value));
    return rows;
}

AssembledSystem disk_system(Factorization f, double anchor_value = 1.0) {
    AssemblyOptions o;
    o.method = f;
    return assemble(disk_rows(20, 16, anchor_value), basis_2d(12), {1.0, 1.0}, o);
}

}  // namespace

TEST(Solve, AnchorOnlySystemInterpolates) {
    const std::vector<ConstraintRow> rows{ConstraintRow::anchor(Vec3(0.3, -0.2, 0.0), 2.0)};
    const BasisSpec b = basis_2d(4);
    const WeightParams w{1.0, 1.0};
    const AssembledSystem s = assemble(rows, b, w);
    SolveOptions o;
    o.want_coeffs = true;
    const SolveResult r = solve_at(s, 0.0, o);
    // N = |b|^2 / Phi_11 with Phi_11 = sum_n 1/d_n.
    double phi11 = 0.0;
    for (std::int64_t n = 0; n < b.size(); ++n) phi11 += 1.0 / weight(b.frequency(n), w);
    EXPECT_NEAR(r.norm_sq / (4.0 / phi11), 1.0, 1e-12);
    ASSERT_TRUE(r.residual);
    EXPECT_LE(*r.residual, 1e-12);
    const auto u = eigenfunction(s, r, {Vec3(0.3, -0.2, 0.0)});
    EXPECT_NEAR(u[0].real(), 2.0, 1e-12);
    EXPECT_NEAR(u[0].imag(), 0.0, 1e-12);
}

TEST(Solve, ZeroRightHandSideGivesZeroNorm) {
    AssembledSystem s = parabola_system(1.0);
    s.g.setZero();
    const SolveResult r = solve_at(s, 0.3);
    EXPECT_EQ(r.norm_sq, 0.0);
    EXPECT_TRUE(r.beta.isZero(0.0));
    const NormSample n = sample_norm(s, 0.3);
    EXPECT_EQ(n.d1, 0.0);
    EXPECT_EQ(norm_only(s, 0.3), 0.0);
}

TEST(Solve, NormIdentities) {
    for (Factorization f : {Factorization::gram, Factorization::orthogonal}) {
        const AssembledSystem s = disk_system(f);
        for (double lam : {0.5, 1.0, 2.7}) {
            const SolveResult r = solve_at(s, lam);
            const CMatrix phi = phi_at(s, lam);
            const double via_g = s.g.dot(r.beta).real();
            const double via_phi = r.beta.dot(phi * r.beta).real();
            EXPECT_NEAR(r.norm_sq / via_g, 1.0, 1e-8) << to_string(f);
            EXPECT_NEAR(via_phi / via_g, 1.0, 1e-8) << to_string(f);
            EXPECT_LE(std::abs(r.norm_sq_imag), 1e-8 * r.norm_sq);
        }
    }
}

TEST(Solve, MethodsAgree) {
    const AssembledSystem g = disk_system(Factorization::gram);
    const AssembledSystem q = disk_system(Factorization::orthogonal);
    for (double lam : {0.2, 1.3, 3.1}) {
        const NormSample a = sample_norm(g, lam), b = sample_norm(q, lam);
        EXPECT_NEAR(a.norm_sq / b.norm_sq, 1.0, 1e-7);
        EXPECT_NEAR(a.d1, b.d1, 1e-6 * std::abs(b.d1) + 1e-9 * b.norm_sq);
        EXPECT_NEAR(a.d2, b.d2, 1e-6 * std::abs(b.d2) + 1e-9 * b.norm_sq);
    }
}

TEST(Solve, CoefficientsFromBothMethodsMatch) {
    const AssembledSystem g = disk_system(Factorization::gram);
    const AssembledSystem q = disk_system(Factorization::orthogonal);
    SolveOptions o;
    o.want_coeffs = true;
    const SolveResult a = solve_at(g, 1.4, o), b = solve_at(q, 1.4, o);
    EXPECT_LE((*a.coeffs - *b.coeffs).norm(), 1e-7 * b.coeffs->norm());
    EXPECT_LE(*b.residual, 1e-8);
    EXPECT_NEAR(a.coeffs->squaredNorm() / a.norm_sq, 1.0, 1e-8);
}

TEST(Derivatives, MatchFiniteDifferences) {
    for (Factorization f : {Factorization::gram, Factorization::orthogonal}) {
        const AssembledSystem s = disk_system(f);
        for (double lam : {0.6, 1.7, 2.4}) {
            const NormSample n = sample_norm(s, lam);
            const double h = 1e-4;
            const double np = norm_only(s, lam + h), nm = norm_only(s, lam - h);
            const double fd1 = (np - nm) / (2 * h);
            const double fd2 = (np - 2 * n.norm_sq + nm) / (h * h);
            EXPECT_LE(std::abs(n.d1 - fd1), 1e-3 * std::abs(fd1)) << to_string(f) << " " << lam;
            EXPECT_LE(std::abs(n.d2 - fd2), 1e-3 * std::abs(fd2)) << to_string(f) << " " << lam;
            const SolveResult r = solve_at(s, lam);
            const NormDerivatives d = norm_derivatives(s, lam, r);
            EXPECT_DOUBLE_EQ(d.d1, n.d1);
        }
    }
}

TEST(Derivatives, ParabolaClosedForm) {
    const double c = 2.5;
    const AssembledSystem s = parabola_system(c);
    for (double lam : {0.0, 2.0, 4.0}) {
        const NormSample n = sample_norm(s, lam);
        EXPECT_NEAR(n.norm_sq, (lam - c) * (lam - c) + 1.0, 1e-12);
        EXPECT_NEAR(n.d1, 2.0 * (lam - c), 1e-12);
        EXPECT_NEAR(n.d2, 2.0, 1e-12);
    }
}

TEST(Newton, ParabolaConvergesInOneStep) {
    const AssembledSystem s = parabola_system(3.0);
    const NewtonResult r = newton_search(s, 0.0);
    EXPECT_TRUE(r.converged);
    EXPECT_TRUE(r.is_minimum);
    EXPECT_NEAR(r.lambda_star, 3.0, 1e-12);
    EXPECT_LE(r.iterations, 2);
    EXPECT_NEAR(r.norm_sq, 1.0, 1e-12);
    EXPECT_EQ(r.history.front().lambda, 0.0);
    EXPECT_EQ(r.history.back().step, 0.0);
}

TEST(Newton, ScaledIdentityPencilHasAMaximumNotAMinimum) {
    // Phi = ((lambda - c)^2 + eps) I: N = |g|^2 / ((lambda - c)^2 + eps) peaks at c.
    const double c = 1.0, eps = 1e-2;
    AssembledSystem s;
    s.phi2 = CMatrix::Identity(2, 2);
    s.phi1 = -2.0 * c * CMatrix::Identity(2, 2);
    s.phi0 = (c * c + eps) * CMatrix::Identity(2, 2);
    s.g = CVector::Ones(2);
    const NormSample at = sample_norm(s, c);
    EXPECT_NEAR(at.norm_sq, 2.0 / eps, 1e-9);
    EXPECT_NEAR(at.d1, 0.0, 1e-9);
    EXPECT_LT(at.d2, 0.0);
    const NewtonResult r = newton_search(s, c + 0.01);
    EXPECT_FALSE(r.converged && std::abs(r.lambda_star - c) < 1e-3);
    EXPECT_GT(std::abs(r.lambda_star - c), 0.01);
}

TEST(Newton, BothSidesOfAScanMinimumAgree) {
    const AssembledSystem s = disk_system(Factorization::orthogonal);
    const auto pts = scan(s, -0.5, 0.5, 41);
    const auto mins = scan_minima(pts);
    ASSERT_FALSE(mins.empty());
    const std::size_t m = mins.front();
    const NewtonOptions o;
    const NewtonResult left = newton_search(s, pts[m - 1].lambda, o);
    const NewtonResult right = newton_search(s, pts[m + 1].lambda, o);
    ASSERT_TRUE(left.converged);
    ASSERT_TRUE(right.converged);
    EXPECT_LE(std::abs(left.lambda_star - right.lambda_star), 2 * o.tol);
}

TEST(Newton, AnchorScalingScalesNormAndKeepsTheMinimum) {
    for (Factorization f : {Factorization::gram, Factorization::orthogonal}) {
        const AssembledSystem a = disk_system(f, 1.0);
        const AssembledSystem b = disk_system(f, 3.0);
        EXPECT_NEAR(norm_only(b, 1.2) / norm_only(a, 1.2), 9.0, 9e-9);
        const NewtonResult ra = newton_search(a, 0.9), rb = newton_search(b, 0.9);
        EXPECT_LE(std::abs(ra.lambda_star - rb.lambda_star), 2e-8);
    }
}

TEST(Factorization, JitterRetryOnSingularPhi) {
    AssembledSystem s;
    s.phi0 = CMatrix::Ones(2, 2);  // rank one
    s.phi1 = CMatrix::Zero(2, 2);
    s.phi2 = CMatrix::Zero(2, 2);
    s.g = CVector::Zero(2);
    s.g[0] = 1.0;
    const PhiFactorization f(s, 0.0);
    EXPECT_DOUBLE_EQ(f.jitter(), 1e-12);
    const SolveResult r = solve_at(s, 0.0);
    EXPECT_GT(r.jitter, 0.0);
}

TEST(Factorization, IndefinitePhiRaisesWithLambda) {
    AssembledSystem s;
    s.phi0 = -CMatrix::Identity(2, 2);
    s.phi1 = CMatrix::Zero(2, 2);
    s.phi2 = CMatrix::Zero(2, 2);
    s.g = CVector::Ones(2);
    try {
        solve_at(s, 0.25);
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_TRUE(e.has_lambda());
        EXPECT_EQ(e.lambda(), 0.25);
    }
    EXPECT_FALSE(scan_point(s, 0.25).ok);
    EXPECT_THROW(solve_at(s, std::nan("")), ConfigError);
}

TEST(Factorization, SolveInvertsPhi) {
    const AssembledSystem s = disk_system(Factorization::orthogonal);
    const PhiFactorization f(s, 0.8);
    CVector x = CVector::Zero(s.size());
    x[3] = cplx(1.0, -2.0);
    x[7] = 0.5;
    const CVector back = phi_at(s, 0.8) * f.solve(x);
    EXPECT_LE((back - x).norm(), 1e-6 * x.norm());
}

TEST(Scan, GridAndMinima) {
    const AssembledSystem s = parabola_system(0.5);
    const auto pts = scan(s, 0.0, 1.0, 11);
    ASSERT_EQ(pts.size(), 11u);
    EXPECT_DOUBLE_EQ(pts.front().lambda, 0.0);
    EXPECT_DOUBLE_EQ(pts.back().lambda, 1.0);
    EXPECT_EQ(scan_minima(pts), std::vector<std::size_t>{5});
    EXPECT_THROW(scan(s, 1.0, 0.0, 5), ConfigError);
    EXPECT_THROW(scan(s, 0.0, 1.0, 1), ConfigError);
}
