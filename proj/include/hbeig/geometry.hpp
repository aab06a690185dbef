#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hbeig/common.hpp"

namespace hbeig {

enum class ShapeKind { unit_sphere, genus2, unit_disk, wavy_catenoid, custom_levelset };

inline const char* to_string(ShapeKind k) {
    switch (k) {
        case ShapeKind::unit_sphere: return "unit_sphere";
        case ShapeKind::genus2: return "genus2";
        case ShapeKind::unit_disk: return "unit_disk";
        case ShapeKind::wavy_catenoid: return "wavy_catenoid";
        case ShapeKind::custom_levelset: return "custom_levelset";
    }
    return "?";
}

/**
 * Parametrized surface patch sigma(s, t) with s periodic on [s_min, s_max)
 * and t_lower(s) <= t <= t_upper(s). Used for surfaces with boundary, where
 * boundary curves and conormals come from the parametrization.
 */
struct SurfacePatch {
    std::function<Vec3(double, double)> sigma;
    std::function<Vec3(double, double)> sigma_s;
    std::function<Vec3(double, double)> sigma_t;
    std::function<double(double)> t_lower, t_upper;
    std::function<double(double)> dt_lower, dt_upper;
    /// (s, t) of a point on the patch.
    std::function<std::pair<double, double>(const Vec3&)> inverse;
    double s_min = 0.0;
    double s_max = 2.0 * M_PI;
    /// Bounds on t over all s, for rejection sampling.
    double t_min = 0.0;
    double t_max = 0.0;

    double area_density(double s, double t) const {
        return sigma_s(s, t).cross(sigma_t(s, t)).norm();
    }
};

/// Implicit geometry: phi < 0 inside, phi = 0 on the surface or boundary.
struct Shape {
    ShapeKind kind = ShapeKind::custom_levelset;
    int dims = 3;
    std::function<double(const Vec3&)> levelset;
    /// Analytic gradient of the level set; central differences when empty.
    std::function<Vec3(const Vec3&)> gradient;
    /// Analytic mean curvature; finite differences of the unit normal when empty.
    std::function<double(const Vec3&)> curvature;
    /// Sampling box for candidate points.
    Vec3 box_lo = Vec3::Constant(-1.0);
    Vec3 box_hi = Vec3::Constant(1.0);
    /// Characteristic size; scales finite-difference steps.
    double diameter = 2.0;
    /// min of phi over the closure of {phi < 0}, when known analytically.
    std::optional<double> levelset_min;
    std::optional<SurfacePatch> patch;

    Vec3 grad(const Vec3& x) const {
        if (gradient) return gradient(x);
        const double h = 1e-6 * diameter;
        Vec3 g = Vec3::Zero();
        for (int d = 0; d < dims; ++d) {
            Vec3 e = Vec3::Zero();
            e[d] = h;
            g[d] = (levelset(x + e) - levelset(x - e)) / (2.0 * h);
        }
        return g;
    }

    bool in_box(const Vec3& x, double slack = 1e-12) const {
        for (int d = 0; d < 3; ++d) {
            if (x[d] < box_lo[d] - slack || x[d] > box_hi[d] + slack) return false;
        }
        return true;
    }

    static Shape unit_sphere() {
        Shape s;
        s.kind = ShapeKind::unit_sphere;
        s.levelset = [](const Vec3& x) { return x.squaredNorm() - 1.0; };
        s.gradient = [](const Vec3& x) { return Vec3(2.0 * x); };
        s.curvature = [](const Vec3& x) { return 2.0 / x.norm(); };
        s.box_lo = Vec3::Constant(-2.0);
        s.box_hi = Vec3::Constant(2.0);
        s.diameter = 2.0;
        s.levelset_min = -1.0;
        return s;
    }

    static Shape genus2() {
        Shape s;
        s.kind = ShapeKind::genus2;
        s.levelset = [](const Vec3& p) {
            const double x = p[0], y = p[1], z = p[2];
            const double a = (x - 1.0) * (x - 1.0) + y * y;
            const double b = (x + 1.0) * (x + 1.0) + y * y;
            return 1.0 / (4.0 * a) + 1.0 / (4.0 * b) + x * x / 10.0 + y * y / 4.0 + z * z - 1.0;
        };
        s.gradient = [](const Vec3& p) {
            const double x = p[0], y = p[1], z = p[2];
            const double a = (x - 1.0) * (x - 1.0) + y * y;
            const double b = (x + 1.0) * (x + 1.0) + y * y;
            const double ia2 = 1.0 / (4.0 * a * a);
            const double ib2 = 1.0 / (4.0 * b * b);
            return Vec3(-2.0 * (x - 1.0) * ia2 - 2.0 * (x + 1.0) * ib2 + x / 5.0,
                        -2.0 * y * ia2 - 2.0 * y * ib2 + y / 2.0, 2.0 * z);
        };
        s.box_lo = Vec3(-3.5, -2.5, -1.25);
        s.box_hi = Vec3(3.5, 2.5, 1.25);
        s.diameter = 2.0 * std::sqrt(10.0);
        return s;
    }

    static Shape unit_disk() {
        Shape s;
        s.kind = ShapeKind::unit_disk;
        s.dims = 2;
        s.levelset = [](const Vec3& x) { return x[0] * x[0] + x[1] * x[1] - 1.0; };
        s.gradient = [](const Vec3& x) { return Vec3(2.0 * x[0], 2.0 * x[1], 0.0); };
        s.curvature = [](const Vec3& x) { return 1.0 / std::hypot(x[0], x[1]); };
        s.box_lo = Vec3(-1.25, -1.25, 0.0);
        s.box_hi = Vec3(1.25, 1.25, 0.0);
        s.diameter = 2.0;
        s.levelset_min = -1.0;
        return s;
    }

    /// sigma(s, t) = (cosh t cos s, cosh t sin s, t), -1 + 0.1 sin 3s <= t <= 1 + 0.1 sin 3s.
    static Shape wavy_catenoid() {
        Shape s;
        s.kind = ShapeKind::wavy_catenoid;
        s.levelset = [](const Vec3& x) {
            const double c = std::cosh(x[2]);
            return x[0] * x[0] + x[1] * x[1] - c * c;
        };
        s.gradient = [](const Vec3& x) {
            return Vec3(2.0 * x[0], 2.0 * x[1], -std::sinh(2.0 * x[2]));
        };
        s.box_lo = Vec3(-1.6, -1.6, -1.2);
        s.box_hi = Vec3(1.6, 1.6, 1.2);
        s.diameter = 2.0 * std::cosh(1.1);

        SurfacePatch p;
        p.sigma = [](double u, double t) {
            return Vec3(std::cosh(t) * std::cos(u), std::cosh(t) * std::sin(u), t);
        };
        p.sigma_s = [](double u, double t) {
            return Vec3(-std::cosh(t) * std::sin(u), std::cosh(t) * std::cos(u), 0.0);
        };
        p.sigma_t = [](double u, double t) {
            return Vec3(std::sinh(t) * std::cos(u), std::sinh(t) * std::sin(u), 1.0);
        };
        p.t_lower = [](double u) { return -1.0 + 0.1 * std::sin(3.0 * u); };
        p.t_upper = [](double u) { return 1.0 + 0.1 * std::sin(3.0 * u); };
        p.dt_lower = [](double u) { return 0.3 * std::cos(3.0 * u); };
        p.dt_upper = p.dt_lower;
        p.inverse = [](const Vec3& x) {
            double u = std::atan2(x[1], x[0]);
            if (u < 0.0) u += 2.0 * M_PI;
            return std::make_pair(u, x[2]);
        };
        p.t_min = -1.1;
        p.t_max = 1.1;
        s.patch = std::move(p);
        return s;
    }

    static Shape custom_levelset(int dims, std::function<double(const Vec3&)> phi, Vec3 lo,
                                 Vec3 hi, double diameter,
                                 std::function<Vec3(const Vec3&)> grad = {}) {
        if (dims < 1 || dims > 3) throw ConfigError("custom shape dims must be 1..3");
        Shape s;
        s.kind = ShapeKind::custom_levelset;
        s.dims = dims;
        s.levelset = std::move(phi);
        s.gradient = std::move(grad);
        s.box_lo = lo;
        s.box_hi = hi;
        s.diameter = diameter;
        return s;
    }
};

inline Shape make_shape(ShapeKind kind) {
    switch (kind) {
        case ShapeKind::unit_sphere: return Shape::unit_sphere();
        case ShapeKind::genus2: return Shape::genus2();
        case ShapeKind::unit_disk: return Shape::unit_disk();
        case ShapeKind::wavy_catenoid: return Shape::wavy_catenoid();
        case ShapeKind::custom_levelset: break;
    }
    throw ConfigError("custom_levelset shapes cannot be built by name");
}

/// Scattered points with optional per-point geometric data.
struct PointCloud {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;
    std::vector<Vec3> conormals;
    std::vector<double> curvature;
    std::uint64_t seed = 0;

    std::size_t size() const { return points.size(); }
    bool has_normals() const { return !points.empty() && normals.size() == points.size(); }
    bool has_conormals() const {
        return !points.empty() && conormals.size() == points.size();
    }
    bool has_curvature() const {
        return !points.empty() && curvature.size() == points.size();
    }

    /// The first n points (and their attributes).
    PointCloud prefix(std::size_t n) const {
        PointCloud c;
        n = std::min(n, size());
        c.points.assign(points.begin(), points.begin() + n);
        if (has_normals()) c.normals.assign(normals.begin(), normals.begin() + n);
        if (has_conormals()) c.conormals.assign(conormals.begin(), conormals.begin() + n);
        if (has_curvature()) c.curvature.assign(curvature.begin(), curvature.begin() + n);
        c.seed = seed;
        return c;
    }

    void append(const PointCloud& other) {
        points.insert(points.end(), other.points.begin(), other.points.end());
        normals.insert(normals.end(), other.normals.begin(), other.normals.end());
        conormals.insert(conormals.end(), other.conormals.begin(), other.conormals.end());
        curvature.insert(curvature.end(), other.curvature.begin(), other.curvature.end());
    }
};

struct CloudParams {
    int n_target = 1;
    /// Candidates per selection run = candidate_multiplier * n_target.
    int candidate_multiplier = 40;
    /// Interior preference weight w for points near the boundary.
    double boundary_weight = 0.0;
    std::uint64_t seed = 1;
    bool with_curvature = false;

    void validate() const {
        if (n_target < 1) throw ConfigError("n_target must be >= 1");
        if (candidate_multiplier < 2) throw ConfigError("candidate_multiplier must be >= 2");
        if (!(boundary_weight >= 0.0)) throw ConfigError("boundary weight must be >= 0");
    }
};

/// Damped Newton projection onto {phi = 0} along the gradient.
inline Vec3 project_to_levelset(const Shape& shape, const Vec3& x0, double tol = 1e-12) {
    constexpr int kMaxIter = 50;
    if (!shape.in_box(x0)) throw ConfigError("projection seed lies outside the shape's box");
    Vec3 x = x0;
    double f = shape.levelset(x);
    for (int it = 0; it < kMaxIter; ++it) {
        if (std::abs(f) <= tol) return x;
        const Vec3 g = shape.grad(x);
        const double g2 = g.squaredNorm();
        if (!(g2 > 0.0) || !std::isfinite(g2))
            throw NumericError("zero gradient encountered while projecting onto level set");
        const Vec3 step = -f / g2 * g;
        double alpha = 1.0;
        Vec3 xn = x + step;
        double fn = shape.levelset(xn);
        for (int h = 0; h < 40 && !(std::isfinite(fn) && std::abs(fn) < std::abs(f)); ++h) {
            alpha *= 0.5;
            xn = x + alpha * step;
            fn = shape.levelset(xn);
        }
        if (!std::isfinite(fn)) throw NumericError("level-set projection left the domain of phi");
        x = xn;
        f = fn;
    }
    if (std::abs(f) <= tol) return x;
    throw NumericError("level-set projection did not converge in 50 iterations");
}

inline Vec3 normal(const Shape& shape, const Vec3& x) {
    const Vec3 g = shape.grad(x);
    const double n = g.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw NumericError("vanishing level-set gradient");
    return g / n;
}

/// div(grad phi / |grad phi|) by central differences with step h.
inline double mean_curvature_fd(const Shape& shape, const Vec3& x, double h) {
    double div = 0.0;
    for (int d = 0; d < shape.dims; ++d) {
        Vec3 e = Vec3::Zero();
        e[d] = h;
        div += (normal(shape, x + e)[d] - normal(shape, x - e)[d]) / (2.0 * h);
    }
    return div;
}

/// Sum of principal curvatures; positive on spheres with the outward normal.
inline double mean_curvature(const Shape& shape, const Vec3& x) {
    if (shape.curvature) return shape.curvature(x);
    return mean_curvature_fd(shape, x, 1e-5 * shape.diameter);
}

/// Outward unit conormal at a point on a boundary curve of a parametrized patch.
inline Vec3 conormal(const Shape& shape, const Vec3& y) {
    if (!shape.patch) throw ConfigError("conormal requires a shape with a parametrized patch");
    const SurfacePatch& p = *shape.patch;
    const auto [s, t] = p.inverse(y);
    const bool upper = std::abs(t - p.t_upper(s)) <= std::abs(t - p.t_lower(s));
    const double dt = upper ? p.dt_upper(s) : p.dt_lower(s);
    const Vec3 tangent = p.sigma_s(s, t) + dt * p.sigma_t(s, t);
    if (!(tangent.norm() > 1e-14)) throw NumericError("degenerate boundary tangent");
    const Vec3 n = normal(shape, y);
    Vec3 nu = tangent.cross(n);
    const double len = nu.norm();
    if (!(len > 1e-14)) throw NumericError("boundary tangent parallel to surface normal");
    nu /= len;
    const double along_t = nu.dot(p.sigma_t(s, t));
    if ((upper && along_t < 0.0) || (!upper && along_t > 0.0)) nu = -nu;
    return nu;
}

namespace detail {

inline Vec3 sample_box(const Shape& shape, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Vec3 x = Vec3::Zero();
    for (int d = 0; d < shape.dims; ++d)
        x[d] = shape.box_lo[d] + (shape.box_hi[d] - shape.box_lo[d]) * u(rng);
    return x;
}

/// Area-uniform sample on a parametrized patch (rejection in (s, t)).
inline Vec3 sample_patch(const SurfacePatch& p, std::mt19937_64& rng, double max_density) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int attempt = 0; attempt < 1000000; ++attempt) {
        const double s = p.s_min + (p.s_max - p.s_min) * u(rng);
        const double t = p.t_min + (p.t_max - p.t_min) * u(rng);
        const double accept = u(rng);
        if (t <= p.t_lower(s) || t >= p.t_upper(s)) continue;
        if (accept * max_density > p.area_density(s, t)) continue;
        return p.sigma(s, t);
    }
    throw NumericError("patch sampling failed");
}

inline double patch_max_density(const SurfacePatch& p) {
    double m = 0.0;
    for (int i = 0; i <= 256; ++i) {
        const double s = p.s_min + (p.s_max - p.s_min) * i / 256.0;
        for (int j = 0; j <= 256; ++j) {
            const double t = p.t_min + (p.t_max - p.t_min) * j / 256.0;
            m = std::max(m, p.area_density(s, t));
        }
    }
    return 1.05 * m;
}

/// Farthest-point selection. The first pick is candidate 0 unless `seeds`
/// is non-empty, in which case distances start from the seed set.
inline std::vector<std::size_t> greedy_farthest(const std::vector<Vec3>& cand, std::size_t count,
                                                const std::vector<Vec3>& seeds = {}) {
    std::vector<std::size_t> picked;
    picked.reserve(count);
    std::vector<double> dmin(cand.size(), std::numeric_limits<double>::infinity());
    for (const Vec3& s : seeds) {
        for (std::size_t i = 0; i < cand.size(); ++i)
            dmin[i] = std::min(dmin[i], (cand[i] - s).squaredNorm());
    }
    while (picked.size() < count) {
        std::size_t best = 0;
        double best_d = -1.0;
        for (std::size_t i = 0; i < cand.size(); ++i) {
            if (dmin[i] > best_d) {
                best_d = dmin[i];
                best = i;
            }
        }
        picked.push_back(best);
        const Vec3 c = cand[best];
        for (std::size_t i = 0; i < cand.size(); ++i)
            dmin[i] = std::min(dmin[i], (cand[i] - c).squaredNorm());
    }
    return picked;
}

inline std::size_t count_distinct(std::vector<Vec3> pts) {
    std::sort(pts.begin(), pts.end(), [](const Vec3& a, const Vec3& b) {
        return std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3);
    });
    return static_cast<std::size_t>(
        std::unique(pts.begin(), pts.end(), [](const Vec3& a, const Vec3& b) { return a == b; }) -
        pts.begin());
}

inline void attach_geometry(const Shape& shape, PointCloud& cloud, bool with_curvature) {
    cloud.normals.clear();
    cloud.curvature.clear();
    for (const Vec3& x : cloud.points) {
        cloud.normals.push_back(normal(shape, x));
        if (with_curvature) cloud.curvature.push_back(mean_curvature(shape, x));
    }
}

/// Candidate points on the zero set: box samples projected by Newton.
inline std::vector<Vec3> projected_candidates(const Shape& shape, std::size_t count,
                                              std::mt19937_64& rng, double tol = 1e-12) {
    std::vector<Vec3> cand;
    cand.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const Vec3 x0 = sample_box(shape, rng);
        try {
            cand.push_back(project_to_levelset(shape, x0, tol));
        } catch (const NumericError&) {
            // candidate dropped
        }
    }
    return cand;
}

}  // namespace detail

/**
 * Farthest-point cloud on the zero set of the level set.
 *
 * candidate_multiplier * n_target random box samples are projected onto
 * the zero set, candidate 0 is taken first and every further point is the
 * candidate farthest (Euclidean) from those already chosen. For shapes with
 * a parametrized patch the cloud lives on the patch's two boundary curves
 * instead, n_target / 2 points on each (the upper curve first), with
 * candidates drawn uniformly in the curve parameter.
 */
inline PointCloud generate_boundary_cloud(const Shape& shape, const CloudParams& params) {
    params.validate();
    std::mt19937_64 rng(params.seed);
    PointCloud cloud;
    cloud.seed = params.seed;

    if (shape.patch) {
        const SurfacePatch& p = *shape.patch;
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const int n_upper = (params.n_target + 1) / 2;
        const int n_lower = params.n_target / 2;
        for (int curve = 0; curve < 2; ++curve) {
            const int n = curve == 0 ? n_upper : n_lower;
            if (n == 0) continue;
            std::vector<Vec3> cand;
            const std::size_t m = static_cast<std::size_t>(params.candidate_multiplier) * n;
            for (std::size_t i = 0; i < m; ++i) {
                const double s = p.s_min + (p.s_max - p.s_min) * u(rng);
                const double t = curve == 0 ? p.t_upper(s) : p.t_lower(s);
                cand.push_back(p.sigma(s, t));
            }
            for (std::size_t idx : detail::greedy_farthest(cand, n)) {
                cloud.points.push_back(cand[idx]);
            }
        }
        detail::attach_geometry(shape, cloud, params.with_curvature);
        for (const Vec3& y : cloud.points) cloud.conormals.push_back(conormal(shape, y));
        return cloud;
    }

    const std::size_t m =
        static_cast<std::size_t>(params.candidate_multiplier) * params.n_target;
    std::vector<Vec3> cand = detail::projected_candidates(shape, m, rng);
    if (detail::count_distinct(cand) < static_cast<std::size_t>(params.n_target))
        throw NumericError("too few distinct candidates survived projection");
    for (std::size_t idx : detail::greedy_farthest(cand, params.n_target))
        cloud.points.push_back(cand[idx]);
    detail::attach_geometry(shape, cloud, params.with_curvature);
    return cloud;
}

namespace detail {

/// Uniform bucket grid over a box for nearest-point queries on a growing point set.
class PointGrid {
public:
    PointGrid(const Vec3& lo, const Vec3& hi, int dims, std::size_t expected) : lo_(lo), dims_(dims) {
        const Vec3 ext = (hi - lo).cwiseMax(Vec3::Constant(1e-12));
        double vol = 1.0;
        for (int d = 0; d < dims; ++d) vol *= ext[d];
        cell_ = std::pow(vol / static_cast<double>(std::max<std::size_t>(expected, 1)), 1.0 / dims);
        for (int d = 0; d < 3; ++d) {
            n_[d] = d < dims ? std::max(1, static_cast<int>(std::ceil(ext[d] / cell_))) : 1;
        }
        cells_.resize(static_cast<std::size_t>(n_[0]) * n_[1] * n_[2]);
    }

    void insert(const Vec3& x) {
        pts_.push_back(x);
        cells_[index(coord(x))].push_back(pts_.size() - 1);
    }

    std::size_t size() const { return pts_.size(); }

    /// Squared distance from z to the nearest stored point. The search may stop
    /// early, returning an upper bound, once that bound drops to `stop_below`.
    double nearest_sq(const Vec3& z, double stop_below = -1.0) const {
        double best = std::numeric_limits<double>::infinity();
        if (pts_.empty()) return best;
        const auto c = coord(z);
        const int rmax = std::max({n_[0], n_[1], n_[2]});
        for (int r = 0; r <= rmax; ++r) {
            visit_ring(c, r, [&](std::size_t i) { best = std::min(best, (pts_[i] - z).squaredNorm()); });
            if (best <= stop_below) return best;
            const double reach = r * cell_;
            if (best <= reach * reach) return best;
        }
        return best;
    }

private:
    std::array<int, 3> coord(const Vec3& x) const {
        std::array<int, 3> c{0, 0, 0};
        for (int d = 0; d < dims_; ++d)
            c[d] = std::clamp(static_cast<int>(std::floor((x[d] - lo_[d]) / cell_)), 0, n_[d] - 1);
        return c;
    }
    std::size_t index(const std::array<int, 3>& c) const {
        return (static_cast<std::size_t>(c[0]) * n_[1] + c[1]) * n_[2] + c[2];
    }

    template <class F>
    void visit_ring(const std::array<int, 3>& c, int r, F&& f) const {
        const int rz = dims_ > 2 ? r : 0, ry = dims_ > 1 ? r : 0;
        for (int i = c[0] - r; i <= c[0] + r; ++i) {
            if (i < 0 || i >= n_[0]) continue;
            for (int j = c[1] - ry; j <= c[1] + ry; ++j) {
                if (j < 0 || j >= n_[1]) continue;
                for (int k = c[2] - rz; k <= c[2] + rz; ++k) {
                    if (k < 0 || k >= n_[2]) continue;
                    if (std::max({std::abs(i - c[0]), std::abs(j - c[1]), std::abs(k - c[2])}) != r) continue;
                    for (std::size_t idx : cells_[index({i, j, k})]) f(idx);
                }
            }
        }
    }

    Vec3 lo_;
    int dims_;
    double cell_ = 1.0;
    std::array<int, 3> n_{1, 1, 1};
    std::vector<std::vector<std::size_t>> cells_;
    std::vector<Vec3> pts_;
};

}  // namespace detail

/// Interior selection weight w (1 - phi(z) / a) + 1 with a = min phi.
inline double interior_penalty_weight(double phi, double a, double w) {
    return w * (1.0 - phi / a) + 1.0;
}

/**
 * Weighted farthest-point cloud in {phi < 0}.
 *
 * Each round draws candidate_multiplier * n_target fresh uniform candidates
 * and keeps the one maximizing
 *   (w (1 - phi(z)/a) + 1) * min_x |x - z|^2
 * over the points chosen so far together with `boundary`. For patch shapes
 * the candidates are area-uniform on the patch, phi vanishes there and the
 * rule reduces to plain farthest-point selection.
 */
inline PointCloud generate_interior_cloud(const Shape& shape, const CloudParams& params,
                                          const PointCloud& boundary) {
    params.validate();
    std::mt19937_64 rng(params.seed);
    const std::size_t batch =
        static_cast<std::size_t>(params.candidate_multiplier) * params.n_target;

    const double max_density = shape.patch ? detail::patch_max_density(*shape.patch) : 0.0;
    auto draw = [&]() -> Vec3 {
        if (shape.patch) return detail::sample_patch(*shape.patch, rng, max_density);
        for (int attempt = 0; attempt < 100000; ++attempt) {
            const Vec3 z = detail::sample_box(shape, rng);
            if (shape.levelset(z) < 0.0) return z;
        }
        throw NumericError("rejection sampling found no interior candidates; check the box");
    };

    std::vector<Vec3> zs(batch);
    auto refill = [&]() {
        for (std::size_t i = 0; i < batch; ++i) zs[i] = draw();
    };

    refill();
    double a = -1.0;
    if (!shape.patch) {
        if (shape.levelset_min) {
            a = *shape.levelset_min;
        } else {
            a = 0.0;
            for (const Vec3& z : zs) a = std::min(a, shape.levelset(z));
            if (!(a < 0.0)) throw NumericError("could not estimate the level-set minimum");
        }
    }

    Vec3 lo = shape.box_lo, hi = shape.box_hi;
    for (const Vec3& x : boundary.points) {
        lo = lo.cwiseMin(x);
        hi = hi.cwiseMax(x);
    }
    detail::PointGrid existing(lo, hi, shape.dims, boundary.size() + static_cast<std::size_t>(params.n_target));
    for (const Vec3& x : boundary.points) existing.insert(x);
    PointCloud cloud;
    cloud.seed = params.seed;
    for (int k = 0; k < params.n_target; ++k) {
        if (k > 0) refill();
        std::size_t best = 0;
        double best_p = -1.0;
        for (std::size_t i = 0; i < batch; ++i) {
            const double wt = shape.patch
                                  ? 1.0
                                  : interior_penalty_weight(shape.levelset(zs[i]), a,
                                                            params.boundary_weight);
            // A candidate whose penalty cannot beat best_p may stop its search early.
            const double dmin = existing.nearest_sq(zs[i], best_p / wt);
            const double pk = wt * dmin;
            if (pk > best_p) {
                best_p = pk;
                best = i;
            }
        }
        cloud.points.push_back(zs[best]);
        existing.insert(zs[best]);
    }
    if (shape.patch) detail::attach_geometry(shape, cloud, params.with_curvature);
    return cloud;
}

/// Monte Carlo estimate of sup_x min_j |x - x_j| over the zero set (or patch).
inline double fill_distance_estimate(const PointCloud& cloud, const Shape& shape, int probes,
                                     std::uint64_t seed = 12345) {
    if (cloud.size() == 0) throw ConfigError("fill distance of an empty cloud");
    if (probes < 10 * static_cast<int>(cloud.size()))
        throw ConfigError("fill distance needs at least 10 probes per cloud point");
    std::mt19937_64 rng(seed);
    std::vector<Vec3> probe_pts;
    if (shape.patch) {
        const double md = detail::patch_max_density(*shape.patch);
        for (int i = 0; i < probes; ++i) probe_pts.push_back(detail::sample_patch(*shape.patch, rng, md));
    } else {
        probe_pts = detail::projected_candidates(shape, static_cast<std::size_t>(probes), rng);
    }
    double sup = 0.0;
    for (const Vec3& p : probe_pts) {
        double dmin = std::numeric_limits<double>::infinity();
        for (const Vec3& x : cloud.points) dmin = std::min(dmin, (x - p).squaredNorm());
        sup = std::max(sup, dmin);
    }
    return std::sqrt(sup);
}

}  // namespace hbeig
