#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "hbeig/common.hpp"

namespace hbeig {

/**
 * Truncated Fourier-extension basis on the box prod_i [-L_i/2, L_i/2].
 *
 * Frequencies are omega = (2 pi k_1 / L_1, ..., 2 pi k_m / L_m) with every
 * k_i in {-K, ..., K}. They are enumerated lexicographically in
 * (k_1, ..., k_m), k_1 varying slowest. Unused trailing components of a
 * frequency (dims < 3) are zero.
 */
struct BasisSpec {
    int dims = 3;
    std::array<double, 3> side_lengths{4.0, 4.0, 4.0};
    int max_index = 15;

    /// Largest basis size accepted; keeps index arithmetic inside int64 and
    /// the per-frequency weight table under ~16 GB.
    static constexpr std::int64_t kMaxBasisSize = std::int64_t{1} << 31;

    void validate() const {
        if (dims < 1 || dims > 3)
            throw ConfigError("basis dims must be 1, 2 or 3");
        if (max_index < 0) throw ConfigError("basis max_index must be >= 0");
        for (int d = 0; d < dims; ++d) {
            if (!(side_lengths[d] > 0.0) || !std::isfinite(side_lengths[d]))
                throw ConfigError("basis side lengths must be positive and finite");
        }
        const double per_dim = 2.0 * max_index + 1.0;
        if (std::pow(per_dim, dims) > static_cast<double>(kMaxBasisSize))
            throw ConfigError("basis size (2K+1)^dims overflows the supported range");
    }

    std::int64_t per_dim() const { return 2 * std::int64_t{max_index} + 1; }

    std::int64_t size() const {
        std::int64_t n = 1;
        for (int d = 0; d < dims; ++d) n *= per_dim();
        return n;
    }

    /// Lattice indices (k_1, ..., k_m) of basis function n; unused entries are 0.
    std::array<int, 3> lattice(std::int64_t n) const {
        std::array<int, 3> k{0, 0, 0};
        const std::int64_t p = per_dim();
        for (int d = dims - 1; d >= 0; --d) {
            k[d] = static_cast<int>(n % p) - max_index;
            n /= p;
        }
        return k;
    }

    Vec3 frequency(std::int64_t n) const {
        const auto k = lattice(n);
        Vec3 w = Vec3::Zero();
        for (int d = 0; d < dims; ++d) w[d] = 2.0 * M_PI * k[d] / side_lengths[d];
        return w;
    }
};

inline std::vector<Vec3> enumerate_frequencies(const BasisSpec& spec) {
    spec.validate();
    const std::int64_t nb = spec.size();
    std::vector<Vec3> out;
    out.reserve(static_cast<std::size_t>(nb));
    for (std::int64_t n = 0; n < nb; ++n) out.push_back(spec.frequency(n));
    return out;
}

/// Smoothness weights d = exp(2q (sqrt(2 pi / T) + sqrt(|omega|))).
struct WeightParams {
    double q = 4.0;
    double T = 4.0;

    void validate() const {
        if (!(q > 0.0) || !std::isfinite(q)) throw ConfigError("weight q must be positive");
        if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("weight T must be positive");
    }

    /// Exponent q (sqrt(2 pi / T) + sqrt(|omega|)), i.e. log(d) / 2.
    double half_log_weight(const Vec3& omega) const {
        return q * (std::sqrt(2.0 * M_PI / T) + std::sqrt(omega.norm()));
    }
};

/// d_n itself. Throws NumericError when d_n overflows a double, which
/// happens once 2q(sqrt(2pi/T) + sqrt|omega|) exceeds ~709.78.
inline double weight(const Vec3& omega, const WeightParams& params) {
    params.validate();
    const double d = std::exp(2.0 * params.half_log_weight(omega));
    if (!std::isfinite(d))
        throw NumericError("weight overflows double precision; reduce q, K or raise T");
    return d;
}

/// d_n^{-1/2}. This is the only form used during assembly, so large
/// exponents underflow gracefully to zero instead of overflowing.
inline double inv_sqrt_weight(const Vec3& omega, const WeightParams& params) {
    return std::exp(-params.half_log_weight(omega));
}

/**
 * Fourier multiplier of a linear differential operator with constant
 * coefficients (at a fixed point).
 *
 * Applying the operator to exp(i omega.x) gives p(omega) exp(i omega.x). All
 * supported operators are at most second order, so every symbol is stored in
 * compiled form p(omega) = s + i g.omega - omega^T H omega.
 */
class OperatorSymbol {
public:
    enum class Kind {
        zero,
        identity,
        gradient_dir,
        laplacian,
        neg_laplacian,
        normal_hessian,
        scalar_multiple,
        sum
    };

    /// The zero operator (used for "no lambda term").
    OperatorSymbol() = default;

    static OperatorSymbol identity() {
        OperatorSymbol s(Kind::identity);
        s.scalar_ = 1.0;
        return s;
    }
    static OperatorSymbol scalar_multiple(double c) {
        OperatorSymbol s(Kind::scalar_multiple);
        s.scalar_ = c;
        return s;
    }
    static OperatorSymbol gradient_dir(const Vec3& v) {
        check_unit(v);
        OperatorSymbol s(Kind::gradient_dir);
        s.grad_ = v;
        return s;
    }
    static OperatorSymbol laplacian() {
        OperatorSymbol s(Kind::laplacian);
        s.hess_ = Eigen::Matrix3d::Identity();
        return s;
    }
    static OperatorSymbol neg_laplacian() {
        OperatorSymbol s(Kind::neg_laplacian);
        s.hess_ = -Eigen::Matrix3d::Identity();
        return s;
    }
    /// v -> n.(D^2 v) n
    static OperatorSymbol normal_hessian(const Vec3& n) {
        check_unit(n);
        OperatorSymbol s(Kind::normal_hessian);
        s.hess_ = n * n.transpose();
        return s;
    }

    Kind kind() const { return kind_; }
    bool is_zero() const {
        return kind_ == Kind::zero ||
               (scalar_ == 0.0 && grad_.isZero(0.0) && hess_.isZero(0.0));
    }

    cplx eval(const Vec3& omega) const {
        return {scalar_ - omega.dot(hess_ * omega), grad_.dot(omega)};
    }

    double scalar_part() const { return scalar_; }
    const Vec3& gradient_part() const { return grad_; }
    const Eigen::Matrix3d& hessian_part() const { return hess_; }

    friend OperatorSymbol operator+(const OperatorSymbol& a, const OperatorSymbol& b) {
        if (a.kind_ == Kind::zero) return b;
        if (b.kind_ == Kind::zero) return a;
        OperatorSymbol s(Kind::sum);
        s.scalar_ = a.scalar_ + b.scalar_;
        s.grad_ = a.grad_ + b.grad_;
        s.hess_ = a.hess_ + b.hess_;
        return s;
    }
    friend OperatorSymbol operator*(double c, const OperatorSymbol& a) {
        if (a.kind_ == Kind::zero) return a;
        OperatorSymbol s(a.kind_ == Kind::scalar_multiple || a.kind_ == Kind::identity
                             ? Kind::scalar_multiple
                             : Kind::sum);
        s.scalar_ = c * a.scalar_;
        s.grad_ = c * a.grad_;
        s.hess_ = c * a.hess_;
        return s;
    }
    friend OperatorSymbol operator-(const OperatorSymbol& a) { return -1.0 * a; }
    friend OperatorSymbol operator-(const OperatorSymbol& a, const OperatorSymbol& b) {
        return a + (-b);
    }

private:
    explicit OperatorSymbol(Kind k) : kind_(k) {}

    static void check_unit(const Vec3& v) {
        if (!(std::abs(v.norm() - 1.0) <= 1e-12))
            throw ConfigError("operator direction vector must have unit norm");
    }

    Kind kind_ = Kind::zero;
    double scalar_ = 0.0;
    Vec3 grad_ = Vec3::Zero();
    Eigen::Matrix3d hess_ = Eigen::Matrix3d::Zero();
};

inline cplx symbol_eval(const OperatorSymbol& sym, const Vec3& omega) {
    return sym.eval(omega);
}

}  // namespace hbeig
