#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hbeig/assembly.hpp"
#include "hbeig/fourier_space.hpp"
#include "hbeig/geometry.hpp"

namespace hbeig {

enum class Family {
    lb_closed_surface,
    steklov_flat,
    steklov_helmholtz,
    schrodinger_steklov,
    surface_steklov
};

inline const char* to_string(Family f) {
    switch (f) {
        case Family::lb_closed_surface: return "lb_closed_surface";
        case Family::steklov_flat: return "steklov_flat";
        case Family::steklov_helmholtz: return "steklov_helmholtz";
        case Family::schrodinger_steklov: return "schrodinger_steklov";
        case Family::surface_steklov: return "surface_steklov";
    }
    return "?";
}

inline bool is_steklov(Family f) { return f != Family::lb_closed_surface; }

/// q(r) = (r/2 + cos(5r)/5) / (2r^3 + 1)
inline double rational_cos5r_potential(double r) {
    return (0.5 * r + std::cos(5.0 * r) / 5.0) / (2.0 * r * r * r + 1.0);
}

inline std::function<double(double)> radial_potential(const std::string& name) {
    if (name == "rational_cos5r") return rational_cos5r_potential;
    if (name == "zero") return [](double) { return 0.0; };
    throw ConfigError("unknown radial potential '" + name + "'");
}

/// splitmix64 step; derives independent RNG streams from one seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// One eigenproblem family with its geometry, basis and point-cloud recipe.
struct ProblemSpec {
    Family family = Family::lb_closed_surface;
    bool use_curvature = false;
    /// Helmholtz wavenumber for steklov_helmholtz (interior row -Lap u - mu^2 u).
    double mu = 0.0;
    /// Radial potential name for schrodinger_steklov.
    std::string potential = "rational_cos5r";
    ShapeKind shape = ShapeKind::unit_sphere;
    BasisSpec basis_spec;
    WeightParams weight_params;
    /// Interior (or surface) points.
    int n_points = 650;
    /// Boundary points (total over all boundary curves).
    int n_boundary = 0;
    int n_anchors = 1;
    std::vector<double> anchor_values{1.0};
    /// Interior preference weight w for points near the boundary.
    double interior_weight = 0.0;
    int candidate_multiplier = 40;
    std::uint64_t seed = 1;
    Factorization factorization = Factorization::gram;

    void validate() const {
        basis_spec.validate();
        weight_params.validate();
        if (n_anchors < 1) throw ConfigError("n_anchors must be >= 1");
        if (anchor_values.size() != 1 && anchor_values.size() != static_cast<std::size_t>(n_anchors))
            throw ConfigError("anchor_values must have 1 or n_anchors entries");
        bool nonzero = false;
        for (double b : anchor_values) nonzero = nonzero || b != 0.0;
        if (!nonzero) throw ConfigError("at least one anchor value must be non-zero");
        if (n_points < 1) throw ConfigError("n_points must be >= 1");
        if (family == Family::lb_closed_surface && n_boundary != 0)
            throw ConfigError("closed-surface problems have no boundary points");
        if (is_steklov(family) && n_boundary < n_anchors)
            throw ConfigError("Steklov problems need at least n_anchors boundary points");
        if (candidate_multiplier < 2) throw ConfigError("candidate_multiplier must be >= 2");
        const int expected_dims = make_shape(shape).dims;
        if (basis_spec.dims != expected_dims)
            throw ConfigError("basis dims do not match the shape dimension");
        if (family == Family::surface_steklov && shape != ShapeKind::wavy_catenoid)
            throw ConfigError("surface_steklov needs a parametrized surface with boundary");
        if ((family == Family::steklov_flat || family == Family::steklov_helmholtz ||
             family == Family::schrodinger_steklov) &&
            expected_dims != 2)
            throw ConfigError("flat Steklov families need a 2D shape");
        if (family == Family::lb_closed_surface && expected_dims != 3)
            throw ConfigError("closed-surface problems need a 3D shape");
    }

    double anchor_value(int j) const {
        return anchor_values.size() == 1 ? anchor_values[0] : anchor_values[static_cast<std::size_t>(j)];
    }
};

/// Point clouds and anchors for one problem instance.
struct ProblemClouds {
    /// Interior points of a flat domain, or the points of a surface.
    PointCloud interior;
    PointCloud boundary;
    std::vector<Vec3> anchors;
    std::vector<double> anchor_values;
};

inline ProblemClouds make_clouds(const ProblemSpec& spec) {
    spec.validate();
    const Shape shape = make_shape(spec.shape);
    ProblemClouds c;
    if (spec.family == Family::lb_closed_surface) {
        CloudParams p{spec.n_points, spec.candidate_multiplier, 0.0, spec.seed, spec.use_curvature};
        c.interior = generate_boundary_cloud(shape, p);
        for (int j = 0; j < spec.n_anchors; ++j) {
            c.anchors.push_back(c.interior.points[static_cast<std::size_t>(j) % c.interior.size()]);
            c.anchor_values.push_back(spec.anchor_value(j));
        }
        return c;
    }
    CloudParams pb{spec.n_boundary, spec.candidate_multiplier, 0.0, spec.seed, false};
    c.boundary = generate_boundary_cloud(shape, pb);
    CloudParams pi{spec.n_points, spec.candidate_multiplier, spec.interior_weight,
                   derive_seed(spec.seed, 1), false};
    c.interior = generate_interior_cloud(shape, pi, c.boundary);
    for (int j = 0; j < spec.n_anchors; ++j) {
        c.anchors.push_back(c.boundary.points[static_cast<std::size_t>(j)]);
        c.anchor_values.push_back(spec.anchor_value(j));
    }
    return c;
}

/// -Lap u + n.(D^2 u) n, the surface-split part of -Lap_S u without the curvature term.
inline OperatorSymbol split_surface_laplacian(const Vec3& n) {
    return OperatorSymbol::neg_laplacian() + OperatorSymbol::normal_hessian(n);
}

/**
 * Constraint rows for the problem's discretization, ordered interior rows,
 * auxiliary normal rows, boundary rows, anchors.
 */
inline std::vector<ConstraintRow> build_rows(const ProblemSpec& spec, const ProblemClouds& clouds) {
    std::vector<ConstraintRow> rows;
    const OperatorSymbol minus_id = -OperatorSymbol::identity();
    const PointCloud& in = clouds.interior;
    const PointCloud& bd = clouds.boundary;

    auto need = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(std::string("point cloud is missing ") + what);
    };

    switch (spec.family) {
        case Family::lb_closed_surface: {
            need(in.has_normals(), "normals");
            if (spec.use_curvature) {
                need(in.has_curvature(), "mean curvature");
                for (std::size_t j = 0; j < in.size(); ++j) {
                    const Vec3& n = in.normals[j];
                    rows.push_back({in.points[j],
                                    split_surface_laplacian(n) +
                                        in.curvature[j] * OperatorSymbol::gradient_dir(n),
                                    minus_id, cplx(0.0), RowTag::interior});
                }
            } else {
                for (std::size_t j = 0; j < in.size(); ++j)
                    rows.push_back({in.points[j], split_surface_laplacian(in.normals[j]), minus_id,
                                    cplx(0.0), RowTag::interior});
                for (std::size_t j = 0; j < in.size(); ++j)
                    rows.push_back({in.points[j], OperatorSymbol::gradient_dir(in.normals[j]),
                                    OperatorSymbol{}, cplx(0.0), RowTag::normal_aux});
            }
            break;
        }
        case Family::steklov_flat:
        case Family::steklov_helmholtz:
        case Family::schrodinger_steklov: {
            need(bd.has_normals(), "boundary normals");
            std::function<double(double)> q;
            if (spec.family == Family::schrodinger_steklov) q = radial_potential(spec.potential);
            for (std::size_t j = 0; j < in.size(); ++j) {
                OperatorSymbol s;
                if (spec.family == Family::steklov_flat) {
                    s = OperatorSymbol::laplacian();
                } else if (spec.family == Family::steklov_helmholtz) {
                    s = OperatorSymbol::neg_laplacian() +
                        OperatorSymbol::scalar_multiple(-spec.mu * spec.mu);
                } else {
                    s = OperatorSymbol::neg_laplacian() +
                        OperatorSymbol::scalar_multiple(q(in.points[j].norm()));
                }
                rows.push_back({in.points[j], s, OperatorSymbol{}, cplx(0.0), RowTag::interior});
            }
            for (std::size_t j = 0; j < bd.size(); ++j)
                rows.push_back({bd.points[j], OperatorSymbol::gradient_dir(bd.normals[j]), minus_id,
                                cplx(0.0), RowTag::boundary});
            break;
        }
        case Family::surface_steklov: {
            need(in.has_normals(), "surface normals");
            need(bd.has_normals(), "boundary normals");
            need(bd.has_conormals(), "boundary conormals");
            for (std::size_t j = 0; j < in.size(); ++j)
                rows.push_back({in.points[j], split_surface_laplacian(in.normals[j]),
                                OperatorSymbol{}, cplx(0.0), RowTag::interior});
            for (std::size_t j = 0; j < in.size(); ++j)
                rows.push_back({in.points[j], OperatorSymbol::gradient_dir(in.normals[j]),
                                OperatorSymbol{}, cplx(0.0), RowTag::normal_aux});
            for (std::size_t j = 0; j < bd.size(); ++j)
                rows.push_back({bd.points[j], OperatorSymbol::gradient_dir(bd.normals[j]),
                                OperatorSymbol{}, cplx(0.0), RowTag::normal_aux});
            for (std::size_t j = 0; j < bd.size(); ++j)
                rows.push_back({bd.points[j], OperatorSymbol::gradient_dir(bd.conormals[j]),
                                minus_id, cplx(0.0), RowTag::boundary});
            break;
        }
    }
    if (clouds.anchors.size() != clouds.anchor_values.size())
        throw ConfigError("anchor points and values differ in length");
    for (std::size_t j = 0; j < clouds.anchors.size(); ++j)
        rows.push_back(ConstraintRow::anchor(clouds.anchors[j], clouds.anchor_values[j]));
    return rows;
}

/// Box-side helper: cube of side l in the given dimension.
inline BasisSpec cube_basis(int dims, double side, int max_index) {
    BasisSpec b;
    b.dims = dims;
    b.side_lengths = {side, dims > 1 ? side : 0.0, dims > 2 ? side : 0.0};
    for (int d = dims; d < 3; ++d) b.side_lengths[d] = 1.0;
    b.max_index = max_index;
    return b;
}

/// Default configuration of each family on its reference geometry.
inline ProblemSpec default_config(Family family) {
    ProblemSpec s;
    s.family = family;
    switch (family) {
        case Family::lb_closed_surface:
            s.shape = ShapeKind::unit_sphere;
            s.basis_spec = cube_basis(3, 4.0, 15);
            s.weight_params = {4.0, 4.0};
            s.n_points = 650;
            s.n_boundary = 0;
            break;
        case Family::steklov_flat:
        case Family::steklov_helmholtz:
        case Family::schrodinger_steklov:
            s.shape = ShapeKind::unit_disk;
            s.basis_spec = cube_basis(2, 4.0, 75);
            s.weight_params = {4.0, 1.0};
            s.n_boundary = 65;
            s.n_points = 264;  // ~ (n_boundary / 4)^2
            s.interior_weight = 4.0;
            s.factorization = Factorization::orthogonal;
            if (family == Family::steklov_helmholtz) s.mu = 2.404825557695773;
            break;
        case Family::surface_steklov:
            s.shape = ShapeKind::wavy_catenoid;
            s.basis_spec = cube_basis(3, 5.0, 15);
            s.weight_params = {4.0, 5.0};
            s.n_boundary = 126;
            // Surface points are not tied to the boundary count; ~2000 resolve the spectrum.
            s.n_points = 2000;
            s.candidate_multiplier = 10;
            s.factorization = Factorization::orthogonal;
            break;
    }
    return s;
}

inline std::vector<std::string> preset_names() {
    return {"sphere-lb",   "sphere-lb-kappa", "genus2-lb",        "genus2-lb-kappa",
            "disk-steklov", "disk-helmholtz", "disk-schrodinger", "catenoid-steklov"};
}

inline ProblemSpec preset(const std::string& name) {
    if (name == "sphere-lb") return default_config(Family::lb_closed_surface);
    if (name == "sphere-lb-kappa") {
        ProblemSpec s = default_config(Family::lb_closed_surface);
        s.use_curvature = true;
        return s;
    }
    if (name == "genus2-lb" || name == "genus2-lb-kappa") {
        ProblemSpec s = default_config(Family::lb_closed_surface);
        s.shape = ShapeKind::genus2;
        s.basis_spec.side_lengths = {10.0, 6.0, 3.0};
        s.weight_params = {5.0, 12.0};
        s.use_curvature = name == "genus2-lb-kappa";
        s.n_points = s.use_curvature ? 2000 : 1200;
        return s;
    }
    if (name == "disk-steklov") return default_config(Family::steklov_flat);
    if (name == "disk-helmholtz") {
        ProblemSpec s = default_config(Family::steklov_helmholtz);
        s.n_boundary = 78;
        s.n_points = 1521;  // (n_boundary / 2)^2
        return s;
    }
    if (name == "disk-schrodinger") {
        ProblemSpec s = default_config(Family::schrodinger_steklov);
        s.n_boundary = 70;
        s.n_points = 1225;
        return s;
    }
    if (name == "catenoid-steklov") return default_config(Family::surface_steklov);
    throw ConfigError("unknown preset '" + name + "'");
}

/// Clouds, rows and the assembled system of one problem.
struct ProblemInstance {
    ProblemClouds clouds;
    AssembledSystem system;
};

/// Generates the clouds, builds the rows and assembles with the spec's factorization.
inline ProblemInstance build_problem(const ProblemSpec& spec, AssemblyOptions opts = {}) {
    ProblemInstance p;
    p.clouds = make_clouds(spec);
    opts.method = spec.factorization;
    p.system = assemble(build_rows(spec, p.clouds), spec.basis_spec, spec.weight_params, opts);
    return p;
}

}  // namespace hbeig
