#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "hbeig/common.hpp"
#include "hbeig/fourier_space.hpp"

namespace hbeig {

enum class RowTag { interior, boundary, anchor, normal_aux };

inline const char* to_string(RowTag t) {
    switch (t) {
        case RowTag::interior: return "interior";
        case RowTag::boundary: return "boundary";
        case RowTag::anchor: return "anchor";
        case RowTag::normal_aux: return "normal_aux";
    }
    return "?";
}

/**
 * One constraint functional u -> (sym0 + lambda sym1) u evaluated at `point`,
 * required to equal `rhs`. sym1 carries the sign of the lambda term, e.g.
 * -identity for "... - lambda u".
 */
struct ConstraintRow {
    Vec3 point = Vec3::Zero();
    OperatorSymbol sym0;
    OperatorSymbol sym1;
    cplx rhs{0.0, 0.0};
    RowTag tag = RowTag::interior;

    static ConstraintRow anchor(const Vec3& a, double value) {
        return {a, OperatorSymbol::identity(), OperatorSymbol{}, cplx(value, 0.0), RowTag::anchor};
    }
};

/**
 * Householder QR of Z = [C_A^H, B0^H, B1^H], where A are the rows without a
 * lambda term and B0 + lambda B1 the remaining rows. In the orthonormal basis
 * Q of Z, C(lambda)^H has the small coordinate matrix
 *
 *   G(lambda) = [ R_A  X0 + lambda X1 ]
 *               [ 0    Y0 + lambda Y1 ]
 *
 * so Phi(lambda) = G^H G can be factored without ever forming Phi.
 */
struct OrthogonalReduction {
    /// Holds the Householder vectors of Z after the in-place QR.
    CMatrix z;
    std::optional<Eigen::HouseholderQR<Eigen::Ref<CMatrix>>> qr;
    /// Upper triangle of the QR, m x m with m = ra + 2 rb.
    CMatrix r;
    /// order[k] = original index of the k-th row in (A, B) order.
    std::vector<Eigen::Index> order;
    Eigen::Index ra = 0;
    Eigen::Index rb = 0;

    OrthogonalReduction() = default;
    OrthogonalReduction(const OrthogonalReduction&) = delete;
    OrthogonalReduction& operator=(const OrthogonalReduction&) = delete;
};

/// Phi(lambda) = lambda^2 phi2 + lambda phi1 + phi0 together with the anchor vector g.
struct AssembledSystem {
    CMatrix phi0, phi1, phi2;
    CVector g;
    std::vector<ConstraintRow> rows;
    BasisSpec basis;
    WeightParams weights;
    std::vector<std::string> warnings;
    /// Present when assembled with Factorization::orthogonal.
    std::shared_ptr<const OrthogonalReduction> reduction;

    Eigen::Index size() const { return g.size(); }
};

/**
 * gram: accumulate the Phi blocks and factor Phi(lambda) by Cholesky.
 * orthogonal: QR-reduce the rows once, then factor each Phi(lambda) through a
 * small QR. Needs the full N_b x (R + R_lambda) matrix in memory but keeps
 * the conditioning of C instead of squaring it.
 */
enum class Factorization { gram, orthogonal };

inline const char* to_string(Factorization f) {
    return f == Factorization::gram ? "gram" : "orthogonal";
}

struct AssemblyOptions {
    /// Basis functions per accumulation chunk.
    std::int64_t chunk = 4096;
    /// Upper bound on the chunk buffers (or the reduced matrix), in bytes.
    std::size_t memory_budget_bytes = std::size_t{2} << 30;
    Factorization method = Factorization::gram;
    /// Orthogonal method only: also form phi0, phi1, phi2 (the solver does not need them).
    bool form_blocks = true;
};

/// (c0, c1) = d_n^{-1/2} p_deg(omega_n) exp(i omega_n . x) for deg = 0, 1.
inline std::pair<cplx, cplx> row_entry(const ConstraintRow& row, std::int64_t n,
                                       const BasisSpec& spec, const WeightParams& weights) {
    const Vec3 w = spec.frequency(n);
    const cplx e = std::exp(cplx(0.0, w.dot(row.point))) * inv_sqrt_weight(w, weights);
    const cplx c1 = row.sym1.is_zero() ? cplx(0.0) : row.sym1.eval(w) * e;
    return {row.sym0.eval(w) * e, c1};
}

namespace detail {

/// Precomputed per-row separable exponentials and per-frequency weights.
class RowBasis {
public:
    RowBasis(const std::vector<ConstraintRow>& rows, const BasisSpec& spec,
             const WeightParams& weights)
        : rows_(rows), spec_(spec), p_(static_cast<int>(spec.per_dim())) {
        const std::int64_t nb = spec.size();
        isw_.resize(static_cast<std::size_t>(nb));
        for (std::int64_t n = 0; n < nb; ++n)
            isw_[static_cast<std::size_t>(n)] = inv_sqrt_weight(spec.frequency(n), weights);
        const std::size_t r = rows.size();
        tables_.resize(r * 3 * static_cast<std::size_t>(p_), cplx(1.0, 0.0));
        for (std::size_t j = 0; j < r; ++j) {
            for (int d = 0; d < spec.dims; ++d) {
                const double base = 2.0 * M_PI / spec.side_lengths[d] * rows[j].point[d];
                for (int k = -spec.max_index; k <= spec.max_index; ++k)
                    table(j, d, k) = std::exp(cplx(0.0, base * k));
            }
        }
    }

    /// Columns [n0, n0 + out.cols()) of C(lambda) = C0 + lambda C1, restricted to `which` rows.
    /// mode 0: C0 only, 1: C1 only, 2: C0 + lambda C1.
    void fill(const std::vector<std::size_t>& which, std::int64_t n0, int mode, double lambda,
              CMatrix& out) const {
        const Eigen::Index m = out.cols();
        for (Eigen::Index c = 0; c < m; ++c) {
            const std::int64_t n = n0 + c;
            const auto k = spec_.lattice(n);
            const Vec3 w = spec_.frequency(n);
            const double s = isw_[static_cast<std::size_t>(n)];
            for (std::size_t i = 0; i < which.size(); ++i) {
                const std::size_t j = which[i];
                cplx e = table(j, 0, k[0]);
                if (spec_.dims > 1) e *= table(j, 1, k[1]);
                if (spec_.dims > 2) e *= table(j, 2, k[2]);
                cplx p;
                if (mode == 0)
                    p = rows_[j].sym0.eval(w);
                else if (mode == 1)
                    p = rows_[j].sym1.eval(w);
                else
                    p = rows_[j].sym0.eval(w) + lambda * rows_[j].sym1.eval(w);
                out(static_cast<Eigen::Index>(i), c) = s * p * e;
            }
        }
    }

    std::int64_t basis_size() const { return static_cast<std::int64_t>(isw_.size()); }

private:
    cplx& table(std::size_t j, int d, int k) {
        return tables_[(j * 3 + static_cast<std::size_t>(d)) * p_ + (k + spec_.max_index)];
    }
    const cplx& table(std::size_t j, int d, int k) const {
        return tables_[(j * 3 + static_cast<std::size_t>(d)) * p_ + (k + spec_.max_index)];
    }

    const std::vector<ConstraintRow>& rows_;
    BasisSpec spec_;
    int p_;
    std::vector<double> isw_;
    std::vector<cplx> tables_;
};

inline std::vector<std::size_t> iota_rows(std::size_t r) {
    std::vector<std::size_t> v(r);
    for (std::size_t i = 0; i < r; ++i) v[i] = i;
    return v;
}

inline void check_budget(std::size_t rows, std::int64_t chunk, const AssemblyOptions& opts) {
    if (opts.chunk < 1) throw ConfigError("assembly chunk must be >= 1");
    const double bytes = static_cast<double>(rows) * static_cast<double>(chunk) * sizeof(cplx);
    if (bytes > static_cast<double>(opts.memory_budget_bytes))
        throw ResourceError("assembly chunk buffers exceed the memory budget; lower the chunk size");
}

inline CMatrix hermitian_from_lower(const CMatrix& lower) {
    CMatrix full = lower.selfadjointView<Eigen::Lower>();
    for (Eigen::Index i = 0; i < full.rows(); ++i) full(i, i) = cplx(full(i, i).real(), 0.0);
    return full;
}

}  // namespace detail

namespace detail {

inline AssembledSystem start_system(const std::vector<ConstraintRow>& rows, const BasisSpec& spec,
                                    const WeightParams& weights) {
    spec.validate();
    weights.validate();
    if (std::none_of(rows.begin(), rows.end(),
                     [](const ConstraintRow& r) { return r.tag == RowTag::anchor; }))
        throw ConfigError("a system needs at least one anchor row");
    AssembledSystem sys;
    sys.rows = rows;
    sys.basis = spec;
    sys.weights = weights;
    if (static_cast<std::int64_t>(rows.size()) > spec.size())
        sys.warnings.push_back("more constraint rows than basis functions; Phi will be singular");
    sys.g = CVector::Zero(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t j = 0; j < rows.size(); ++j)
        sys.g[static_cast<Eigen::Index>(j)] = rows[j].rhs;
    return sys;
}

inline void assemble_gram(AssembledSystem& sys, const AssemblyOptions& opts) {
    const std::vector<ConstraintRow>& rows = sys.rows;
    const BasisSpec& spec = sys.basis;
    const WeightParams& weights = sys.weights;
    const std::size_t r = rows.size();
    const std::int64_t nb = spec.size();

    std::vector<std::size_t> all = detail::iota_rows(r);
    std::vector<std::size_t> lam;
    for (std::size_t j = 0; j < r; ++j)
        if (!rows[j].sym1.is_zero()) lam.push_back(j);

    const std::int64_t chunk = std::min<std::int64_t>(opts.chunk, nb);
    check_budget(r + lam.size(), chunk, opts);

    const auto R = static_cast<Eigen::Index>(r);
    const auto S = static_cast<Eigen::Index>(lam.size());
    CMatrix p0 = CMatrix::Zero(R, R);
    CMatrix p2s = CMatrix::Zero(S, S);
    CMatrix x = CMatrix::Zero(R, S);

    RowBasis rb(sys.rows, spec, weights);
    CMatrix c0, c1;
    for (std::int64_t n0 = 0; n0 < nb; n0 += chunk) {
        const auto m = static_cast<Eigen::Index>(std::min(chunk, nb - n0));
        c0.resize(R, m);
        rb.fill(all, n0, 0, 0.0, c0);
        p0.selfadjointView<Eigen::Lower>().rankUpdate(c0);
        if (S > 0) {
            c1.resize(S, m);
            rb.fill(lam, n0, 1, 0.0, c1);
            p2s.selfadjointView<Eigen::Lower>().rankUpdate(c1);
            x.noalias() += c0 * c1.adjoint();
        }
    }

    sys.phi0 = hermitian_from_lower(p0);
    sys.phi2 = CMatrix::Zero(R, R);
    sys.phi1 = CMatrix::Zero(R, R);
    if (S > 0) {
        const CMatrix p2full = hermitian_from_lower(p2s);
        for (Eigen::Index a = 0; a < S; ++a) {
            for (Eigen::Index b = 0; b < S; ++b)
                sys.phi2(static_cast<Eigen::Index>(lam[a]), static_cast<Eigen::Index>(lam[b])) =
                    p2full(a, b);
            sys.phi1.col(static_cast<Eigen::Index>(lam[a])) = x.col(a);
        }
        CMatrix sym = sys.phi1 + sys.phi1.adjoint();
        sys.phi1 = std::move(sym);
        for (Eigen::Index i = 0; i < R; ++i) sys.phi1(i, i) = cplx(sys.phi1(i, i).real(), 0.0);
    }
}

inline void assemble_orthogonal(AssembledSystem& sys, const AssemblyOptions& opts) {
    const std::vector<ConstraintRow>& rows = sys.rows;
    const std::int64_t nb = sys.basis.size();
    auto red = std::make_shared<OrthogonalReduction>();
    std::vector<std::size_t> a_rows, b_rows;
    for (std::size_t j = 0; j < rows.size(); ++j)
        (rows[j].sym1.is_zero() ? a_rows : b_rows).push_back(j);
    red->ra = static_cast<Eigen::Index>(a_rows.size());
    red->rb = static_cast<Eigen::Index>(b_rows.size());
    for (std::size_t j : a_rows) red->order.push_back(static_cast<Eigen::Index>(j));
    for (std::size_t j : b_rows) red->order.push_back(static_cast<Eigen::Index>(j));
    const Eigen::Index ra = red->ra, rb = red->rb, m = ra + 2 * rb;
    if (m > nb)
        throw NumericError("orthogonal reduction needs R + R_lambda <= N_b; increase the basis size");
    const double bytes = static_cast<double>(nb) * static_cast<double>(m) * sizeof(cplx);
    if (bytes > static_cast<double>(opts.memory_budget_bytes))
        throw ResourceError("orthogonal reduction exceeds the memory budget; use the gram method");

    red->z.resize(nb, m);
    CMatrix& z = red->z;
    RowBasis rbasis(rows, sys.basis, sys.weights);
    const std::int64_t chunk = std::min<std::int64_t>(std::max<std::int64_t>(opts.chunk, 1), nb);
    CMatrix c;
    for (std::int64_t n0 = 0; n0 < nb; n0 += chunk) {
        const auto w = static_cast<Eigen::Index>(std::min(chunk, nb - n0));
        c.resize(ra, w);
        rbasis.fill(a_rows, n0, 0, 0.0, c);
        z.block(n0, 0, w, ra) = c.adjoint();
        c.resize(rb, w);
        rbasis.fill(b_rows, n0, 0, 0.0, c);
        z.block(n0, ra, w, rb) = c.adjoint();
        rbasis.fill(b_rows, n0, 1, 0.0, c);
        z.block(n0, ra + rb, w, rb) = c.adjoint();
    }
    red->qr.emplace(z);
    red->r = z.topRows(m).triangularView<Eigen::Upper>();

    if (opts.form_blocks) {
        // Blocks in (A, B) order first, then scattered back to the row order.
        const Eigen::Index n = ra + rb;
        const auto g0 = red->r.leftCols(n);
        const auto g1 = red->r.rightCols(rb);
        const CMatrix p0 = g0.adjoint() * g0;
        const CMatrix x = g0.adjoint() * g1;
        const CMatrix p2 = g1.adjoint() * g1;
        const auto R = static_cast<Eigen::Index>(rows.size());
        sys.phi0.resize(R, R);
        sys.phi1 = CMatrix::Zero(R, R);
        sys.phi2 = CMatrix::Zero(R, R);
        const auto& o = red->order;
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index i = 0; i < n; ++i) sys.phi0(o[i], o[j]) = p0(i, j);
        for (Eigen::Index j = 0; j < rb; ++j) {
            for (Eigen::Index i = 0; i < n; ++i) {
                sys.phi1(o[i], o[ra + j]) += x(i, j);
                sys.phi1(o[ra + j], o[i]) += std::conj(x(i, j));
            }
            for (Eigen::Index i = 0; i < rb; ++i) sys.phi2(o[ra + i], o[ra + j]) = p2(i, j);
        }
        for (CMatrix* b : {&sys.phi0, &sys.phi1, &sys.phi2}) *b = hermitian_from_lower(*b);
    }
    sys.reduction = std::move(red);
}

}  // namespace detail

/**
 * Builds phi0 = C0 C0^H, phi1 = C0 C1^H + C1 C0^H and phi2 = C1 C1^H.
 *
 * With the gram method the blocks are accumulated over basis chunks so only
 * O(R * chunk) extra memory is live at once; chunks are reduced in increasing
 * basis order. With the orthogonal method they are formed from the QR
 * reduction, which the solver then uses instead of the blocks.
 */
inline AssembledSystem assemble(const std::vector<ConstraintRow>& rows, const BasisSpec& spec,
                                const WeightParams& weights, const AssemblyOptions& opts = {}) {
    AssembledSystem sys = detail::start_system(rows, spec, weights);
    if (opts.method == Factorization::orthogonal)
        detail::assemble_orthogonal(sys, opts);
    else
        detail::assemble_gram(sys, opts);
    return sys;
}

/// Phi(lambda) from precomputed blocks.
inline CMatrix phi_at(const AssembledSystem& sys, double lambda) {
    CMatrix phi = sys.phi0;
    phi += lambda * sys.phi1;
    phi += (lambda * lambda) * sys.phi2;
    return phi;
}

/// Phi(lambda) = C(lambda) C(lambda)^H assembled directly at one lambda.
inline CMatrix assemble_at(const std::vector<ConstraintRow>& rows, const BasisSpec& spec,
                           const WeightParams& weights, double lambda,
                           const AssemblyOptions& opts = {}) {
    spec.validate();
    weights.validate();
    const std::size_t r = rows.size();
    const std::int64_t nb = spec.size();
    const std::int64_t chunk = std::min<std::int64_t>(opts.chunk, nb);
    detail::check_budget(r, chunk, opts);
    const auto R = static_cast<Eigen::Index>(r);
    CMatrix p = CMatrix::Zero(R, R);
    detail::RowBasis rb(rows, spec, weights);
    const std::vector<std::size_t> all = detail::iota_rows(r);
    CMatrix c;
    for (std::int64_t n0 = 0; n0 < nb; n0 += chunk) {
        const auto m = static_cast<Eigen::Index>(std::min(chunk, nb - n0));
        c.resize(R, m);
        rb.fill(all, n0, 2, lambda, c);
        p.selfadjointView<Eigen::Lower>().rankUpdate(c);
    }
    return detail::hermitian_from_lower(p);
}

/// Basis coefficients a = C(lambda)^H beta of the interpolant.
inline CVector coefficients(const std::vector<ConstraintRow>& rows, const BasisSpec& spec,
                            const WeightParams& weights, double lambda, const CVector& beta,
                            const AssemblyOptions& opts = {}) {
    const std::int64_t nb = spec.size();
    const std::int64_t chunk = std::min<std::int64_t>(opts.chunk, nb);
    detail::check_budget(rows.size(), chunk, opts);
    detail::RowBasis rb(rows, spec, weights);
    const std::vector<std::size_t> all = detail::iota_rows(rows.size());
    CVector a(nb);
    CMatrix c;
    for (std::int64_t n0 = 0; n0 < nb; n0 += chunk) {
        const auto m = static_cast<Eigen::Index>(std::min(chunk, nb - n0));
        c.resize(static_cast<Eigen::Index>(rows.size()), m);
        rb.fill(all, n0, 2, lambda, c);
        a.segment(n0, m).noalias() = c.adjoint() * beta;
    }
    return a;
}

/// C(lambda) a: every row functional applied to the function with coefficients a.
inline CVector apply_rows(const std::vector<ConstraintRow>& rows, const BasisSpec& spec,
                          const WeightParams& weights, double lambda, const CVector& a,
                          const AssemblyOptions& opts = {}) {
    const std::int64_t nb = spec.size();
    if (a.size() != nb) throw ConfigError("coefficient vector does not match the basis size");
    const std::int64_t chunk = std::min<std::int64_t>(opts.chunk, nb);
    detail::check_budget(rows.size(), chunk, opts);
    detail::RowBasis rb(rows, spec, weights);
    const std::vector<std::size_t> all = detail::iota_rows(rows.size());
    CVector out = CVector::Zero(static_cast<Eigen::Index>(rows.size()));
    CMatrix c;
    for (std::int64_t n0 = 0; n0 < nb; n0 += chunk) {
        const auto m = static_cast<Eigen::Index>(std::min(chunk, nb - n0));
        c.resize(static_cast<Eigen::Index>(rows.size()), m);
        rb.fill(all, n0, 2, lambda, c);
        out.noalias() += c * a.segment(n0, m);
    }
    return out;
}

/**
 * Binary dump of an assembled system, little-endian:
 *   char[8]  magic "HBEIGPHI"
 *   uint32   format version (1)
 *   uint32   reserved (0)
 *   uint64   R
 *   phi0, phi1, phi2: R*R complex doubles each, row-major, (re, im) pairs
 *   g: R complex doubles
 */
inline void write_system_binary(std::ostream& os, const AssembledSystem& sys) {
    static_assert(std::endian::native == std::endian::little, "binary dump assumes little-endian");
    const char magic[8] = {'H', 'B', 'E', 'I', 'G', 'P', 'H', 'I'};
    os.write(magic, 8);
    const std::uint32_t version = 1, reserved = 0;
    os.write(reinterpret_cast<const char*>(&version), 4);
    os.write(reinterpret_cast<const char*>(&reserved), 4);
    const std::uint64_t r = static_cast<std::uint64_t>(sys.size());
    os.write(reinterpret_cast<const char*>(&r), 8);
    auto put = [&os](const cplx& z) {
        const double v[2] = {z.real(), z.imag()};
        os.write(reinterpret_cast<const char*>(v), sizeof v);
    };
    for (const CMatrix* m : {&sys.phi0, &sys.phi1, &sys.phi2})
        for (Eigen::Index i = 0; i < m->rows(); ++i)
            for (Eigen::Index j = 0; j < m->cols(); ++j) put((*m)(i, j));
    for (Eigen::Index i = 0; i < sys.g.size(); ++i) put(sys.g[i]);
    if (!os) throw Error("failed writing system dump");
}

/// Reads the blocks written by write_system_binary (rows and basis are not stored).
inline AssembledSystem read_system_binary(std::istream& is) {
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, "HBEIGPHI", 8) != 0) throw ConfigError("not a system dump");
    std::uint32_t version = 0, reserved = 0;
    std::uint64_t r = 0;
    is.read(reinterpret_cast<char*>(&version), 4);
    is.read(reinterpret_cast<char*>(&reserved), 4);
    is.read(reinterpret_cast<char*>(&r), 8);
    if (!is || version != 1) throw ConfigError("unsupported system dump version");
    auto get = [&is]() {
        double v[2];
        is.read(reinterpret_cast<char*>(v), sizeof v);
        return cplx(v[0], v[1]);
    };
    AssembledSystem sys;
    const auto R = static_cast<Eigen::Index>(r);
    for (CMatrix* m : {&sys.phi0, &sys.phi1, &sys.phi2}) {
        m->resize(R, R);
        for (Eigen::Index i = 0; i < R; ++i)
            for (Eigen::Index j = 0; j < R; ++j) (*m)(i, j) = get();
    }
    sys.g.resize(R);
    for (Eigen::Index i = 0; i < R; ++i) sys.g[i] = get();
    if (!is) throw ConfigError("truncated system dump");
    return sys;
}

}  // namespace hbeig
