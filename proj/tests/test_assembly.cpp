#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "hbeig/assembly.hpp"

using namespace hbeig;

namespace {

BasisSpec basis_1d(int k, double l) {
    BasisSpec b;
    b.dims = 1;
    b.max_index = k;
    b.side_lengths = {l, 1.0, 1.0};
    return b;
}

// u'' - lambda u at x0, u' at x1 (no lambda), anchor u(x2) = 1.
std::vector<ConstraintRow> three_rows() {
    const Vec3 e(1, 0, 0);
    return {
        {Vec3(0.1, 0, 0), OperatorSymbol::laplacian(), -OperatorSymbol::identity(), cplx(0.0), RowTag::interior},
        {Vec3(-0.35, 0, 0), OperatorSymbol::gradient_dir(e), OperatorSymbol{}, cplx(0.0), RowTag::boundary},
        ConstraintRow::anchor(Vec3(0.4, 0, 0), 1.0),
    };
}

// Dense C0, C1 straight from the definition of the row functionals.
void brute_rows(const std::vector<ConstraintRow>& rows, const BasisSpec& b, const WeightParams& w,
                CMatrix& c0, CMatrix& c1) {
    const auto nb = static_cast<Eigen::Index>(b.size());
    c0.resize(static_cast<Eigen::Index>(rows.size()), nb);
    c1.resize(c0.rows(), nb);
    for (std::size_t j = 0; j < rows.size(); ++j) {
        for (Eigen::Index n = 0; n < nb; ++n) {
            const double k = static_cast<double>(n - b.max_index);
            const double om = 2.0 * M_PI * k / b.side_lengths[0];
            const double d = std::exp(2.0 * w.q * (std::sqrt(2.0 * M_PI / w.T) + std::sqrt(std::abs(om))));
            const cplx e = std::exp(cplx(0.0, om * rows[j].point[0])) / std::sqrt(d);
            // Symbols written out by hand: u'' -> -om^2, u' -> i om, u -> 1.
            cplx p0, p1;
            switch (rows[j].tag) {
                case RowTag::interior: p0 = -om * om; p1 = -1.0; break;
                case RowTag::boundary: p0 = cplx(0.0, om); p1 = 0.0; break;
                default: p0 = 1.0; p1 = 0.0; break;
            }
            c0(static_cast<Eigen::Index>(j), n) = p0 * e;
            c1(static_cast<Eigen::Index>(j), n) = p1 * e;
        }
    }
}

double max_abs(const CMatrix& m) { return m.cwiseAbs().maxCoeff(); }

std::vector<ConstraintRow> random_rows_2d(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<ConstraintRow> rows;
    for (int i = 0; i < n; ++i) {
        const Vec3 x(u(rng), u(rng), 0.0);
        if (i % 2 == 0) {
            rows.push_back({x, OperatorSymbol::laplacian(), OperatorSymbol{}, cplx(0.0), RowTag::interior});
        } else {
            const double a = 2.0 * M_PI * (u(rng) + 1.0) / 2.0;
            rows.push_back({x, OperatorSymbol::gradient_dir(Vec3(std::cos(a), std::sin(a), 0.0)),
                            -OperatorSymbol::identity(), cplx(0.0), RowTag::boundary});
        }
    }
    rows.push_back(ConstraintRow::anchor(Vec3(0.5, 0.5, 0.0), 1.0));
    return rows;
}

BasisSpec basis_2d(int k) {
    BasisSpec b;
    b.dims = 2;
    b.max_index = k;
    b.side_lengths = {4.0, 4.0, 1.0};
    return b;
}

}  // namespace

TEST(Assembly, BruteForceOracle1D) {
    const BasisSpec b = basis_1d(2, 2.0);
    const WeightParams w{1.0, 2.0};
    const auto rows = three_rows();
    CMatrix c0, c1;
    brute_rows(rows, b, w, c0, c1);
    const CMatrix p0 = c0 * c0.adjoint();
    const CMatrix p1 = c0 * c1.adjoint() + c1 * c0.adjoint();
    const CMatrix p2 = c1 * c1.adjoint();
    const double scale = max_abs(p0);

    for (std::int64_t chunk : {1, 2, 4096}) {
        AssemblyOptions o;
        o.chunk = chunk;
        const AssembledSystem s = assemble(rows, b, w, o);
        EXPECT_LE(max_abs(s.phi0 - p0), 1e-12 * scale) << chunk;
        EXPECT_LE(max_abs(s.phi1 - p1), 1e-12 * scale) << chunk;
        EXPECT_LE(max_abs(s.phi2 - p2), 1e-12 * scale) << chunk;
        EXPECT_EQ(s.g, CVector((CVector(3) << 0.0, 0.0, 1.0).finished()));
    }
    AssemblyOptions o;
    o.method = Factorization::orthogonal;
    const AssembledSystem s = assemble(rows, b, w, o);
    ASSERT_TRUE(s.reduction);
    EXPECT_LE(max_abs(s.phi0 - p0), 1e-12 * scale);
    EXPECT_LE(max_abs(s.phi1 - p1), 1e-12 * scale);
    EXPECT_LE(max_abs(s.phi2 - p2), 1e-12 * scale);

    for (double lam : {-1.0, 0.5, 3.0}) {
        const CMatrix want = (c0 + lam * c1) * (c0 + lam * c1).adjoint();
        EXPECT_LE(max_abs(assemble_at(rows, b, w, lam) - want), 1e-12 * max_abs(want));
        EXPECT_LE(max_abs(phi_at(s, lam) - want), 1e-12 * max_abs(want));
    }
}

TEST(Assembly, RowEntryMatchesBruteForce) {
    const BasisSpec b = basis_1d(2, 2.0);
    const WeightParams w{1.0, 2.0};
    const auto rows = three_rows();
    CMatrix c0, c1;
    brute_rows(rows, b, w, c0, c1);
    for (std::size_t j = 0; j < rows.size(); ++j) {
        for (std::int64_t n = 0; n < b.size(); ++n) {
            const auto [e0, e1] = row_entry(rows[j], n, b, w);
            EXPECT_LE(std::abs(e0 - c0(static_cast<Eigen::Index>(j), n)), 1e-15);
            EXPECT_LE(std::abs(e1 - c1(static_cast<Eigen::Index>(j), n)), 1e-15);
        }
    }
}

TEST(Assembly, ChunkingDoesNotChangeTheBlocks) {
    const auto rows = random_rows_2d(30, 1);
    const BasisSpec b = basis_2d(8);
    const WeightParams w{2.0, 1.0};
    AssemblyOptions big, small;
    small.chunk = 7;
    const AssembledSystem a = assemble(rows, b, w, big);
    const AssembledSystem c = assemble(rows, b, w, small);
    const double scale = max_abs(a.phi0);
    EXPECT_LE(max_abs(a.phi0 - c.phi0), 1e-13 * scale);
    EXPECT_LE(max_abs(a.phi1 - c.phi1), 1e-13 * scale);
    EXPECT_LE(max_abs(a.phi2 - c.phi2), 1e-13 * scale);
}

TEST(Assembly, OrthogonalBlocksAgreeWithGram) {
    const auto rows = random_rows_2d(40, 2);
    const BasisSpec b = basis_2d(10);
    const WeightParams w{2.0, 1.0};
    AssemblyOptions o;
    o.method = Factorization::orthogonal;
    const AssembledSystem g = assemble(rows, b, w);
    const AssembledSystem q = assemble(rows, b, w, o);
    const double scale = max_abs(g.phi0);
    EXPECT_LE(max_abs(g.phi0 - q.phi0), 1e-11 * scale);
    EXPECT_LE(max_abs(g.phi1 - q.phi1), 1e-11 * scale);
    EXPECT_LE(max_abs(g.phi2 - q.phi2), 1e-11 * scale);
    EXPECT_EQ(q.reduction->ra + q.reduction->rb, static_cast<Eigen::Index>(rows.size()));

    o.form_blocks = false;
    const AssembledSystem lean = assemble(rows, b, w, o);
    EXPECT_EQ(lean.phi0.size(), 0);
    EXPECT_TRUE(lean.reduction);
}

TEST(Assembly, BlocksAreHermitianAndPhiPositiveDefinite) {
    const auto rows = random_rows_2d(25, 3);
    const AssembledSystem s = assemble(rows, basis_2d(8), {2.0, 1.0});
    for (const CMatrix* m : {&s.phi0, &s.phi1, &s.phi2}) EXPECT_EQ(max_abs(*m - m->adjoint()), 0.0);
    for (double lam : {0.0, 1.5, -2.0}) {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(phi_at(s, lam));
        EXPECT_GT(es.eigenvalues().minCoeff(), 0.0) << lam;
    }
}

TEST(Assembly, CoefficientsReproduceRowValues) {
    const auto rows = random_rows_2d(20, 4);
    const BasisSpec b = basis_2d(8);
    const WeightParams w{2.0, 1.0};
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n;
    CVector beta(static_cast<Eigen::Index>(rows.size()));
    for (auto& v : beta) v = cplx(n(rng), n(rng));
    const double lam = 0.7;
    const CVector a = coefficients(rows, b, w, lam, beta);
    EXPECT_EQ(a.size(), b.size());
    const CVector got = apply_rows(rows, b, w, lam, a);
    const CVector want = assemble_at(rows, b, w, lam) * beta;
    EXPECT_LE((got - want).norm(), 1e-12 * want.norm());
    EXPECT_THROW(apply_rows(rows, b, w, lam, CVector::Zero(3)), ConfigError);
}

TEST(Assembly, RejectsSystemsWithoutAnchor) {
    auto rows = three_rows();
    rows.pop_back();
    EXPECT_THROW(assemble(rows, basis_1d(2, 2.0), {1.0, 2.0}), ConfigError);
}

TEST(Assembly, WarnsWhenRowsExceedBasis) {
    const auto rows = random_rows_2d(30, 5);
    const AssembledSystem s = assemble(rows, basis_2d(2), {1.0, 1.0});
    EXPECT_FALSE(s.warnings.empty());
    AssemblyOptions o;
    o.method = Factorization::orthogonal;
    EXPECT_THROW(assemble(rows, basis_2d(2), {1.0, 1.0}, o), NumericError);
}

TEST(Assembly, MemoryBudgetIsEnforced) {
    AssemblyOptions o;
    o.memory_budget_bytes = 64;
    EXPECT_THROW(assemble(three_rows(), basis_1d(2, 2.0), {1.0, 2.0}, o), ResourceError);
    o.method = Factorization::orthogonal;
    EXPECT_THROW(assemble(three_rows(), basis_1d(2, 2.0), {1.0, 2.0}, o), ResourceError);
    o = {};
    o.chunk = 0;
    EXPECT_THROW(assemble(three_rows(), basis_1d(2, 2.0), {1.0, 2.0}, o), ConfigError);
}

TEST(Assembly, BinaryDumpRoundTrips) {
    const AssembledSystem s = assemble(random_rows_2d(12, 6), basis_2d(6), {2.0, 1.0});
    std::stringstream buf;
    write_system_binary(buf, s);
    const std::string bytes = buf.str();
    EXPECT_EQ(bytes.substr(0, 8), "HBEIGPHI");
    const std::size_t r = static_cast<std::size_t>(s.size());
    EXPECT_EQ(bytes.size(), 8 + 4 + 4 + 8 + (3 * r * r + r) * 16);
    const AssembledSystem t = read_system_binary(buf);
    EXPECT_EQ(t.phi0, s.phi0);
    EXPECT_EQ(t.phi1, s.phi1);
    EXPECT_EQ(t.phi2, s.phi2);
    EXPECT_EQ(t.g, s.g);

    std::stringstream bad("NOTADUMP........");
    EXPECT_THROW(read_system_binary(bad), ConfigError);
    std::stringstream cut(bytes.substr(0, bytes.size() - 5));
    EXPECT_THROW(read_system_binary(cut), ConfigError);
}
