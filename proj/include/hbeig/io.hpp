#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hbeig/geometry.hpp"
#include "hbeig/multiplicity.hpp"
#include "hbeig/problems.hpp"
#include "hbeig/solver.hpp"

namespace hbeig {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------- enums

inline Family family_from_string(const std::string& s) {
    for (Family f : {Family::lb_closed_surface, Family::steklov_flat, Family::steklov_helmholtz,
                     Family::schrodinger_steklov, Family::surface_steklov})
        if (s == to_string(f)) return f;
    throw ConfigError("unknown family '" + s + "'");
}

inline ShapeKind shape_from_string(const std::string& s) {
    for (ShapeKind k : {ShapeKind::unit_sphere, ShapeKind::genus2, ShapeKind::unit_disk,
                        ShapeKind::wavy_catenoid})
        if (s == to_string(k)) return k;
    throw ConfigError("unknown shape '" + s + "'");
}

inline Factorization factorization_from_string(const std::string& s) {
    if (s == "gram") return Factorization::gram;
    if (s == "orthogonal") return Factorization::orthogonal;
    throw ConfigError("unknown factorization '" + s + "'");
}

// ---------------------------------------------------------------- problem spec

inline json to_json(const ProblemSpec& p) {
    json j;
    j["family"] = to_string(p.family);
    j["use_curvature"] = p.use_curvature;
    j["mu"] = p.mu;
    j["potential"] = p.potential;
    j["shape"] = to_string(p.shape);
    j["basis_spec"] = {{"dims", p.basis_spec.dims},
                       {"side_lengths", std::vector<double>(p.basis_spec.side_lengths.begin(),
                                                            p.basis_spec.side_lengths.begin() +
                                                                p.basis_spec.dims)},
                       {"max_index", p.basis_spec.max_index}};
    j["weight_params"] = {{"q", p.weight_params.q}, {"T", p.weight_params.T}};
    j["n_points"] = p.n_points;
    j["n_boundary"] = p.n_boundary;
    j["n_anchors"] = p.n_anchors;
    j["anchor_values"] = p.anchor_values;
    j["interior_weight"] = p.interior_weight;
    j["candidate_multiplier"] = p.candidate_multiplier;
    j["seed"] = p.seed;
    j["factorization"] = to_string(p.factorization);
    return j;
}

namespace detail {

template <class T>
void read_field(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

inline void check_keys(const json& j, const std::vector<std::string>& allowed, const char* where) {
    if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

}  // namespace detail

/// Applies the keys present in `j` on top of `base`. A "preset" key selects the base.
inline ProblemSpec problem_from_json(const json& j, ProblemSpec base) {
    detail::check_keys(j,
                       {"preset", "family", "use_curvature", "mu", "potential", "shape", "basis_spec",
                        "weight_params", "n_points", "n_boundary", "n_anchors", "anchor_values",
                        "interior_weight", "candidate_multiplier", "seed", "factorization"},
                       "problem");
    ProblemSpec p = base;
    if (j.contains("preset")) p = preset(j.at("preset").get<std::string>());
    std::string s;
    if (j.contains("family")) {
        detail::read_field(j, "family", s);
        p.family = family_from_string(s);
    }
    if (j.contains("shape")) {
        detail::read_field(j, "shape", s);
        p.shape = shape_from_string(s);
    }
    if (j.contains("factorization")) {
        detail::read_field(j, "factorization", s);
        p.factorization = factorization_from_string(s);
    }
    detail::read_field(j, "use_curvature", p.use_curvature);
    detail::read_field(j, "mu", p.mu);
    detail::read_field(j, "potential", p.potential);
    if (j.contains("basis_spec")) {
        const json& b = j.at("basis_spec");
        detail::check_keys(b, {"dims", "side_lengths", "max_index"}, "basis_spec");
        detail::read_field(b, "dims", p.basis_spec.dims);
        detail::read_field(b, "max_index", p.basis_spec.max_index);
        if (b.contains("side_lengths")) {
            std::vector<double> l;
            detail::read_field(b, "side_lengths", l);
            if (l.empty() || l.size() > 3) throw ConfigError("side_lengths needs 1 to 3 entries");
            for (std::size_t d = 0; d < 3; ++d) p.basis_spec.side_lengths[d] = l[std::min(d, l.size() - 1)];
        }
    }
    if (j.contains("weight_params")) {
        const json& w = j.at("weight_params");
        detail::check_keys(w, {"q", "T"}, "weight_params");
        detail::read_field(w, "q", p.weight_params.q);
        detail::read_field(w, "T", p.weight_params.T);
    }
    detail::read_field(j, "n_points", p.n_points);
    detail::read_field(j, "n_boundary", p.n_boundary);
    detail::read_field(j, "n_anchors", p.n_anchors);
    detail::read_field(j, "anchor_values", p.anchor_values);
    detail::read_field(j, "interior_weight", p.interior_weight);
    detail::read_field(j, "candidate_multiplier", p.candidate_multiplier);
    detail::read_field(j, "seed", p.seed);
    return p;
}

// ---------------------------------------------------------------- run config

struct ScanParams {
    double lambda_min = 0.0;
    double lambda_max = 1.0;
    int steps = 101;
};

struct NewtonParams {
    /// Explicit starting points; when empty the (n/2)^2 grid for n = grid_min..grid_max is used.
    std::vector<double> lambda0;
    int grid_min = 0;
    int grid_max = 30;
    double tol = 1e-8;
    int max_iter = 50;

    std::vector<double> starts() const {
        if (!lambda0.empty()) return lambda0;
        std::vector<double> s;
        for (int n = grid_min; n <= grid_max; ++n) s.push_back(0.25 * n * n);
        return s;
    }
};

struct MultiplicityParams {
    double lambda = 0.0;
    std::vector<int> n_anchors{1};
    int n1 = 800;
    int n2 = 0;  // 0: (10/9) n1
    double cutoff = 1.25;
    std::vector<std::uint64_t> seeds{1};
};

struct EigenfunctionParams {
    double lambda = 0.0;
    /// Refine lambda by Newton before evaluating.
    bool refine = false;
    double tol = 1e-8;
    bool dump_phi = false;
};

struct RunConfig {
    std::string command;
    ProblemSpec problem;
    ScanParams scan;
    NewtonParams newton;
    MultiplicityParams multiplicity;
    EigenfunctionParams eigenfunction;
    std::string out_dir = "out";
    int workers = 1;
};

inline json to_json(const RunConfig& c) {
    json j;
    j["command"] = c.command;
    j["problem"] = to_json(c.problem);
    j["scan"] = {{"lambda_min", c.scan.lambda_min}, {"lambda_max", c.scan.lambda_max},
                 {"steps", c.scan.steps}};
    j["newton"] = {{"lambda0", c.newton.lambda0}, {"grid_min", c.newton.grid_min},
                   {"grid_max", c.newton.grid_max}, {"tol", c.newton.tol},
                   {"max_iter", c.newton.max_iter}};
    j["multiplicity"] = {{"lambda", c.multiplicity.lambda}, {"n_anchors", c.multiplicity.n_anchors},
                         {"n1", c.multiplicity.n1}, {"n2", c.multiplicity.n2},
                         {"cutoff", c.multiplicity.cutoff}, {"seeds", c.multiplicity.seeds}};
    j["eigenfunction"] = {{"lambda", c.eigenfunction.lambda}, {"refine", c.eigenfunction.refine},
                          {"tol", c.eigenfunction.tol}, {"dump_phi", c.eigenfunction.dump_phi}};
    j["out"] = c.out_dir;
    j["workers"] = c.workers;
    return j;
}

inline RunConfig run_config_from_json(const json& j, RunConfig base = {}) {
    detail::check_keys(j, {"command", "problem", "scan", "newton", "multiplicity", "eigenfunction",
                           "out", "workers"},
                       "config");
    RunConfig c = std::move(base);
    detail::read_field(j, "command", c.command);
    if (j.contains("problem")) c.problem = problem_from_json(j.at("problem"), c.problem);
    if (j.contains("scan")) {
        const json& s = j.at("scan");
        detail::check_keys(s, {"lambda_min", "lambda_max", "steps"}, "scan");
        detail::read_field(s, "lambda_min", c.scan.lambda_min);
        detail::read_field(s, "lambda_max", c.scan.lambda_max);
        detail::read_field(s, "steps", c.scan.steps);
    }
    if (j.contains("newton")) {
        const json& s = j.at("newton");
        detail::check_keys(s, {"lambda0", "grid_min", "grid_max", "tol", "max_iter"}, "newton");
        detail::read_field(s, "lambda0", c.newton.lambda0);
        detail::read_field(s, "grid_min", c.newton.grid_min);
        detail::read_field(s, "grid_max", c.newton.grid_max);
        detail::read_field(s, "tol", c.newton.tol);
        detail::read_field(s, "max_iter", c.newton.max_iter);
    }
    if (j.contains("multiplicity")) {
        const json& s = j.at("multiplicity");
        detail::check_keys(s, {"lambda", "n_anchors", "n1", "n2", "cutoff", "seeds"}, "multiplicity");
        detail::read_field(s, "lambda", c.multiplicity.lambda);
        detail::read_field(s, "n_anchors", c.multiplicity.n_anchors);
        detail::read_field(s, "n1", c.multiplicity.n1);
        detail::read_field(s, "n2", c.multiplicity.n2);
        detail::read_field(s, "cutoff", c.multiplicity.cutoff);
        detail::read_field(s, "seeds", c.multiplicity.seeds);
    }
    if (j.contains("eigenfunction")) {
        const json& s = j.at("eigenfunction");
        detail::check_keys(s, {"lambda", "refine", "tol", "dump_phi"}, "eigenfunction");
        detail::read_field(s, "lambda", c.eigenfunction.lambda);
        detail::read_field(s, "refine", c.eigenfunction.refine);
        detail::read_field(s, "tol", c.eigenfunction.tol);
        detail::read_field(s, "dump_phi", c.eigenfunction.dump_phi);
    }
    detail::read_field(j, "out", c.out_dir);
    detail::read_field(j, "workers", c.workers);
    return c;
}

inline RunConfig parse_run_config(std::istream& is, RunConfig base = {}) {
    json j;
    try {
        j = json::parse(is, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return run_config_from_json(j, std::move(base));
}

// ---------------------------------------------------------------- CSV

/// Shortest decimal text that parses back to the same double.
inline std::string fmt_double(double v) {
    char buf[32];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

/// "# key: value" comment lines: software version, seed and the full config echo.
inline std::string csv_comment_header(const json& config, std::uint64_t seed) {
    std::ostringstream os;
    os << "# hbeig " << kVersion << "\n";
    os << "# seed: " << seed << "\n";
    os << "# config: " << config.dump() << "\n";
    return os.str();
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, ',')) out.push_back(cur);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_double(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) throw ConfigError("bad number '" + s + "' in CSV");
    return v;
}

}  // namespace detail

/// Columns x,y,z then nx,ny,nz, cnx,cny,cnz and kappa for the attributes the cloud has.
inline void write_cloud_csv(std::ostream& os, const PointCloud& cloud, const std::string& comments = {}) {
    os << comments;
    os << "x,y,z";
    const bool n = cloud.has_normals(), c = cloud.has_conormals(), k = cloud.has_curvature();
    if (n) os << ",nx,ny,nz";
    if (c) os << ",cnx,cny,cnz";
    if (k) os << ",kappa";
    os << "\n";
    auto vec = [&os](const Vec3& v) {
        os << fmt_double(v[0]) << ',' << fmt_double(v[1]) << ',' << fmt_double(v[2]);
    };
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        vec(cloud.points[i]);
        if (n) {
            os << ',';
            vec(cloud.normals[i]);
        }
        if (c) {
            os << ',';
            vec(cloud.conormals[i]);
        }
        if (k) os << ',' << fmt_double(cloud.curvature[i]);
        os << "\n";
    }
}

/// Reads a cloud CSV; '#' comment lines before the header are skipped, a "# seed:" line is honored.
inline PointCloud read_cloud_csv(std::istream& is) {
    PointCloud cloud;
    std::string line;
    std::vector<std::string> header;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (line.rfind("# seed: ", 0) == 0) cloud.seed = std::stoull(line.substr(8));
            continue;
        }
        header = detail::split_csv(line);
        break;
    }
    static const std::vector<std::string> order{"x", "y", "z", "nx", "ny", "nz", "cnx",
                                                "cny", "cnz", "kappa"};
    if (header.size() < 3 || header[0] != "x" || header[1] != "y" || header[2] != "z")
        throw ConfigError("cloud CSV header must start with x,y,z");
    bool n = false, c = false, k = false;
    std::size_t pos = 3;
    auto take = [&](std::initializer_list<const char*> names) {
        if (pos >= header.size() || header[pos] != *names.begin()) return false;
        for (const char* nm : names) {
            if (pos >= header.size() || header[pos] != nm) throw ConfigError("malformed cloud CSV header");
            ++pos;
        }
        return true;
    };
    n = take({"nx", "ny", "nz"});
    c = take({"cnx", "cny", "cnz"});
    k = take({"kappa"});
    if (pos != header.size()) throw ConfigError("unexpected column in cloud CSV header");
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto f = detail::split_csv(line);
        if (f.size() != header.size()) throw ConfigError("cloud CSV row has the wrong column count");
        std::size_t i = 0;
        auto vec = [&]() {
            Vec3 v(detail::parse_double(f[i]), detail::parse_double(f[i + 1]),
                   detail::parse_double(f[i + 2]));
            i += 3;
            return v;
        };
        cloud.points.push_back(vec());
        if (n) cloud.normals.push_back(vec());
        if (c) cloud.conormals.push_back(vec());
        if (k) cloud.curvature.push_back(detail::parse_double(f[i]));
    }
    return cloud;
}

inline void write_scan_csv(std::ostream& os, const std::vector<ScanPoint>& pts,
                           const std::string& comments = {}) {
    os << comments << "lambda,norm_sq,dnorm_sq,factorization_ok\n";
    for (const ScanPoint& p : pts)
        os << fmt_double(p.lambda) << ',' << fmt_double(p.ok ? p.norm_sq : std::nan(""))
           << ',' << fmt_double(p.ok ? p.d1 : std::nan("")) << ',' << (p.ok ? 1 : 0) << "\n";
}

inline std::vector<ScanPoint> read_scan_csv(std::istream& is) {
    std::vector<ScanPoint> pts;
    std::string line;
    bool header = false;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            if (line != "lambda,norm_sq,dnorm_sq,factorization_ok")
                throw ConfigError("not a scan CSV");
            header = true;
            continue;
        }
        const auto f = detail::split_csv(line);
        if (f.size() != 4) throw ConfigError("scan CSV row has the wrong column count");
        ScanPoint p;
        p.lambda = detail::parse_double(f[0]);
        p.ok = f[3] == "1";
        if (p.ok) {
            p.norm_sq = detail::parse_double(f[1]);
            p.d1 = detail::parse_double(f[2]);
        }
        pts.push_back(p);
    }
    return pts;
}

inline void write_newton_trace_csv(std::ostream& os, const NewtonResult& r,
                                   const std::string& comments = {}) {
    os << comments << "iter,lambda,norm_sq,d1,d2,step\n";
    for (const NewtonStep& s : r.history)
        os << s.iter << ',' << fmt_double(s.lambda) << ',' << fmt_double(s.norm_sq) << ','
           << fmt_double(s.d1) << ',' << fmt_double(s.d2) << ',' << fmt_double(s.step) << "\n";
}

struct NewtonRun {
    double lambda0 = 0.0;
    NewtonResult result;
    bool failed = false;
    std::string error;
};

inline void write_newton_summary_csv(std::ostream& os, const std::vector<NewtonRun>& runs,
                                     const std::string& comments = {}) {
    os << comments << "lambda0,lambda_star,norm_sq,d1,d2,iterations,converged,is_minimum\n";
    for (const NewtonRun& r : runs) {
        const NewtonResult& n = r.result;
        os << fmt_double(r.lambda0) << ',' << fmt_double(r.failed ? std::nan("") : n.lambda_star)
           << ',' << fmt_double(r.failed ? std::nan("") : n.norm_sq) << ',' << fmt_double(n.d1)
           << ',' << fmt_double(n.d2) << ',' << n.iterations << ',' << (n.converged ? 1 : 0)
           << ',' << (n.is_minimum ? 1 : 0) << "\n";
    }
}

inline void write_multiplicity_csv(std::ostream& os, const std::vector<MultiplicityReport>& reps,
                                   const std::string& comments = {}) {
    os << comments << "lambda,n_anchors,n1,n2,seed,norm_sq1,norm_sq2,ratio,verdict\n";
    for (const MultiplicityReport& r : reps)
        os << fmt_double(r.lambda) << ',' << r.n_anchors << ',' << r.n1 << ',' << r.n2 << ','
           << r.seed << ',' << fmt_double(r.norm_sq1) << ',' << fmt_double(r.norm_sq2) << ','
           << fmt_double(r.ratio) << ',' << to_string(r.verdict) << "\n";
}

// ---------------------------------------------------------------- SVG

/// Polyline plot of N(lambda) with a log-scale y axis; points that failed are skipped.
inline std::string scan_svg(const std::vector<ScanPoint>& pts, const std::string& title = "N(lambda)") {
    const double w = 800, h = 500, ml = 80, mr = 20, mt = 40, mb = 50;
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const ScanPoint& p : pts) {
        x0 = std::min(x0, p.lambda);
        x1 = std::max(x1, p.lambda);
        if (p.ok && p.norm_sq > 0.0) {
            y0 = std::min(y0, std::log10(p.norm_sq));
            y1 = std::max(y1, std::log10(p.norm_sq));
        }
    }
    if (!(x1 > x0)) x1 = x0 + 1.0;
    if (!std::isfinite(y0)) y0 = 0.0, y1 = 1.0;
    if (!(y1 > y0)) y1 = y0 + 1.0;
    auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * (w - ml - mr); };
    auto py = [&](double ly) { return h - mb - (ly - y0) / (y1 - y0) * (h - mt - mb); };
    auto num = [](double v) {
        char b[32];
        std::snprintf(b, sizeof b, "%.2f", v);
        return std::string(b);
    };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
       << "\" viewBox=\"0 0 " << w << ' ' << h << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
          "font-size=\"16\">"
       << title << "</text>\n";
    os << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr << "\" y2=\"" << h - mb
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << h - mb
       << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double xv = x0 + (x1 - x0) * i / 5.0, yv = y0 + (y1 - y0) * i / 5.0;
        os << "<text x=\"" << num(px(xv)) << "\" y=\"" << h - mb + 18
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
           << fmt_double(std::round(xv * 1000.0) / 1000.0) << "</text>\n";
        os << "<text x=\"" << ml - 6 << "\" y=\"" << num(py(yv) + 4)
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">1e"
           << num(yv) << "</text>\n";
    }
    os << "<text x=\"" << w / 2 << "\" y=\"" << h - 10
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">lambda</text>\n";
    std::string poly;
    auto flush = [&]() {
        if (!poly.empty())
            os << "<polyline fill=\"none\" stroke=\"#1f4e99\" stroke-width=\"1.5\" points=\"" << poly
               << "\"/>\n";
        poly.clear();
    };
    for (const ScanPoint& p : pts) {
        if (!p.ok || !(p.norm_sq > 0.0)) {
            flush();
            continue;
        }
        if (!poly.empty()) poly += ' ';
        poly += num(px(p.lambda)) + "," + num(py(std::log10(p.norm_sq)));
    }
    flush();
    os << "</svg>\n";
    return os.str();
}

}  // namespace hbeig
