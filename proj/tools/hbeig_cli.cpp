// hbeig: batch runner for the norm-minimization eigenvalue experiments.
//
//   hbeig scan         --preset disk-steklov --lambda-min 0 --lambda-max 21 --steps 841
//   hbeig newton       --preset sphere-lb --grid-max 30
//   hbeig multiplicity --preset sphere-lb --lambda 56 --anchors 15,16 --n1 800 --seeds 1,2,3
//   hbeig eigenfunction --preset genus2-lb --lambda 0.626 --refine
//   hbeig cloud        --preset genus2-lb --n-points 1600
//
// Exit status: 0 success, 1 configuration error, 2 numerical failure.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <thread>

#include <CLI11.hpp>

#include "hbeig/hbeig.hpp"

namespace fs = std::filesystem;
using namespace hbeig;

namespace {

/// Runs job(i) for i in [0, n) on `workers` threads; results are stored by index.
template <class Job>
void parallel_for(std::size_t n, int workers, Job job) {
    const auto w = static_cast<std::size_t>(std::max(1, workers));
    if (w == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(w, n); ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    job(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mu);
                    if (!err) err = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw ConfigError("cannot write " + p.string());
    return os;
}

std::string header(const RunConfig& cfg) { return csv_comment_header(to_json(cfg), cfg.problem.seed); }

ProblemInstance build(const RunConfig& cfg) {
    std::cerr << "assembling " << to_string(cfg.problem.family) << " on "
              << to_string(cfg.problem.shape) << " (" << to_string(cfg.problem.factorization)
              << ")\n";
    ProblemInstance p = build_problem(cfg.problem);
    for (const auto& w : p.system.warnings) std::cerr << "warning: " << w << "\n";
    std::cerr << "rows: " << p.system.size() << ", basis functions: " << cfg.problem.basis_spec.size()
              << "\n";
    return p;
}

int cmd_cloud(const RunConfig& cfg) {
    const ProblemClouds c = make_clouds(cfg.problem);
    const fs::path out(cfg.out_dir);
    {
        auto os = open_out(out / "cloud_interior.csv");
        write_cloud_csv(os, c.interior, header(cfg));
    }
    if (c.boundary.size() > 0) {
        auto os = open_out(out / "cloud_boundary.csv");
        write_cloud_csv(os, c.boundary, header(cfg));
    }
    std::cout << "interior points: " << c.interior.size() << ", boundary points: " << c.boundary.size()
              << "\n";
    return 0;
}

int cmd_scan(const RunConfig& cfg) {
    const ScanParams& s = cfg.scan;
    if (!(s.lambda_min < s.lambda_max)) throw ConfigError("scan needs lambda_min < lambda_max");
    if (s.steps < 2) throw ConfigError("scan needs at least 2 steps");
    const ProblemInstance p = build(cfg);
    std::vector<ScanPoint> pts(static_cast<std::size_t>(s.steps));
    parallel_for(pts.size(), cfg.workers, [&](std::size_t i) {
        const double lam = s.lambda_min + (s.lambda_max - s.lambda_min) * static_cast<double>(i) / (s.steps - 1);
        pts[i] = scan_point(p.system, lam);
    });
    const fs::path out(cfg.out_dir);
    {
        auto os = open_out(out / "scan.csv");
        write_scan_csv(os, pts, header(cfg));
    }
    {
        auto os = open_out(out / "scan.svg");
        os << scan_svg(pts, std::string("N(lambda), ") + to_string(cfg.problem.family));
    }
    int failed = 0;
    for (const auto& q : pts) failed += q.ok ? 0 : 1;
    std::cout << "scan points: " << pts.size() << ", factorization failures: " << failed << "\n";
    for (std::size_t i : scan_minima(pts)) std::cout << "local minimum near lambda = " << pts[i].lambda << "\n";
    return 0;
}

int cmd_newton(const RunConfig& cfg) {
    const std::vector<double> starts = cfg.newton.starts();
    if (starts.empty()) throw ConfigError("newton needs at least one starting value");
    const ProblemInstance p = build(cfg);
    NewtonOptions opts;
    opts.tol = cfg.newton.tol;
    opts.max_iter = cfg.newton.max_iter;
    std::vector<NewtonRun> runs(starts.size());
    parallel_for(runs.size(), cfg.workers, [&](std::size_t i) {
        runs[i].lambda0 = starts[i];
        try {
            runs[i].result = newton_search(p.system, starts[i], opts);
        } catch (const NumericError& e) {
            runs[i].failed = true;
            runs[i].error = e.what();
        }
    });
    const fs::path out(cfg.out_dir);
    {
        auto os = open_out(out / "newton.csv");
        write_newton_summary_csv(os, runs, header(cfg));
    }
    fs::create_directories(out / "traces");
    for (std::size_t i = 0; i < runs.size(); ++i) {
        if (runs[i].failed) continue;
        auto os = open_out(out / "traces" / ("newton_trace_" + std::to_string(i) + ".csv"));
        write_newton_trace_csv(os, runs[i].result, header(cfg) + "# lambda0: " + fmt_double(starts[i]) + "\n");
    }
    std::vector<double> found;
    int failures = 0;
    for (const auto& r : runs) {
        if (r.failed) {
            ++failures;
            std::cerr << "start " << r.lambda0 << ": " << r.error << "\n";
            continue;
        }
        if (!r.result.converged) continue;
        const double l = r.result.lambda_star;
        if (std::none_of(found.begin(), found.end(),
                         [&](double f) { return std::abs(f - l) <= 1e-6 * std::max(1.0, std::abs(l)); }))
            found.push_back(l);
    }
    std::sort(found.begin(), found.end());
    std::cout.precision(12);
    for (double l : found) std::cout << "eigenvalue estimate " << l << "\n";
    return failures == static_cast<int>(runs.size()) ? 2 : 0;
}

int cmd_multiplicity(const RunConfig& cfg) {
    const MultiplicityParams& m = cfg.multiplicity;
    const int n2 = m.n2 > 0 ? m.n2 : default_n2(m.n1);
    MultiplicityOptions opts;
    opts.cutoff = m.cutoff;
    std::vector<std::vector<MultiplicityReport>> per_seed(m.seeds.size());
    parallel_for(m.seeds.size(), cfg.workers, [&](std::size_t i) {
        per_seed[i] = multiplicity_ratios(cfg.problem, m.lambda, m.n_anchors, m.n1, n2, m.seeds[i], opts);
    });
    std::vector<MultiplicityReport> all;
    for (const auto& v : per_seed) all.insert(all.end(), v.begin(), v.end());
    {
        auto os = open_out(fs::path(cfg.out_dir) / "multiplicity.csv");
        write_multiplicity_csv(os, all, header(cfg));
    }
    std::map<int, std::vector<double>> by_na;
    for (const auto& r : all) by_na[r.n_anchors].push_back(r.ratio);
    std::cout.precision(6);
    for (auto& [na, v] : by_na) {
        std::sort(v.begin(), v.end());
        const double med = v[v.size() / 2];
        std::cout << "n_anchors " << na << ": median ratio " << med << " -> "
                  << to_string(classify_ratio(med, m.cutoff)) << "\n";
    }
    return 0;
}

int cmd_eigenfunction(const RunConfig& cfg) {
    const ProblemInstance p = build(cfg);
    double lambda = cfg.eigenfunction.lambda;
    if (cfg.eigenfunction.refine) {
        NewtonOptions o;
        o.tol = cfg.eigenfunction.tol;
        const NewtonResult r = newton_search(p.system, lambda, o);
        if (!r.converged) std::cerr << "warning: Newton refinement did not converge\n";
        lambda = r.lambda_star;
    }
    SolveOptions so;
    so.want_coeffs = true;
    const SolveResult res = solve_at(p.system, lambda, so);
    PointCloud pts = p.clouds.interior;
    pts.append(p.clouds.boundary);
    const auto u = eigenfunction(p.system, res, pts.points);
    const fs::path out(cfg.out_dir);
    {
        auto os = open_out(out / "eigenfunction.csv");
        os << header(cfg) << "# lambda: " << fmt_double(lambda) << "\n# norm_sq: " << fmt_double(res.norm_sq)
           << "\nx,y,z,re,im\n";
        for (std::size_t i = 0; i < u.size(); ++i)
            os << fmt_double(pts.points[i][0]) << ',' << fmt_double(pts.points[i][1]) << ','
               << fmt_double(pts.points[i][2]) << ',' << fmt_double(u[i].real()) << ','
               << fmt_double(u[i].imag()) << "\n";
    }
    if (cfg.eigenfunction.dump_phi) {
        auto os = open_out(out / "system.bin");
        write_system_binary(os, p.system);
    }
    std::cout.precision(12);
    std::cout << "lambda " << lambda << ", N " << res.norm_sq << ", max constraint residual "
              << res.residual.value_or(0.0) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Eigenvalues by Hilbert-norm minimization of Hermite-Birkhoff interpolants"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1, 1);

    std::string config_path, preset_name, out_dir, factorization;
    std::uint64_t seed = 0;
    int workers = 0, n_points = 0, n_boundary = 0;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
        sub->add_option("--preset", preset_name, "named problem preset");
        sub->add_option("--seed", seed, "RNG seed for the point clouds");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--n-points", n_points, "interior / surface point count");
        sub->add_option("--n-boundary", n_boundary, "boundary point count");
        sub->add_option("--factorization", factorization, "gram or orthogonal");
    };

    double lambda_min = NAN, lambda_max = NAN, tol = NAN, lambda = NAN, cutoff = NAN;
    int steps = 0, grid_max = -1, max_iter = 0, n1 = 0, n2 = 0;
    std::vector<double> lambda0;
    std::vector<int> anchors;
    std::vector<std::uint64_t> seeds;
    bool refine = false, dump_phi = false;

    CLI::App* scan_cmd = app.add_subcommand("scan", "N(lambda) on a uniform grid, CSV and SVG");
    common(scan_cmd);
    scan_cmd->add_option("--lambda-min", lambda_min);
    scan_cmd->add_option("--lambda-max", lambda_max);
    scan_cmd->add_option("--steps", steps);

    CLI::App* newton_cmd = app.add_subcommand("newton", "Newton searches for minima of N(lambda)");
    common(newton_cmd);
    newton_cmd->add_option("--lambda0", lambda0, "starting values (default: (n/2)^2 grid)")->delimiter(',');
    newton_cmd->add_option("--grid-max", grid_max, "largest n of the (n/2)^2 start grid");
    newton_cmd->add_option("--tol", tol);
    newton_cmd->add_option("--max-iter", max_iter);

    CLI::App* mult_cmd = app.add_subcommand("multiplicity", "norm-ratio multiplicity test");
    common(mult_cmd);
    mult_cmd->add_option("--lambda", lambda);
    mult_cmd->add_option("--anchors", anchors, "anchor counts")->delimiter(',');
    mult_cmd->add_option("--n1", n1);
    mult_cmd->add_option("--n2", n2);
    mult_cmd->add_option("--cutoff", cutoff);
    mult_cmd->add_option("--seeds", seeds)->delimiter(',');

    CLI::App* eig_cmd = app.add_subcommand("eigenfunction", "evaluate u_lambda on the cloud");
    common(eig_cmd);
    eig_cmd->add_option("--lambda", lambda);
    eig_cmd->add_flag("--refine", refine, "Newton-refine lambda first");
    eig_cmd->add_option("--tol", tol);
    eig_cmd->add_flag("--dump-phi", dump_phi, "write the Phi blocks to system.bin");

    CLI::App* cloud_cmd = app.add_subcommand("cloud", "generate and export point clouds");
    common(cloud_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        RunConfig cfg;
        cfg.command = app.get_subcommands().front()->get_name();
        if (!preset_name.empty()) cfg.problem = preset(preset_name);
        if (!config_path.empty()) {
            std::ifstream is(config_path);
            if (!is) throw ConfigError("cannot read " + config_path);
            json j;
            try {
                j = json::parse(is, nullptr, true, true);
            } catch (const json::parse_error& e) {
                throw ConfigError(std::string("config is not valid JSON: ") + e.what());
            }
            if (!preset_name.empty() && j.contains("problem")) j["problem"].erase("preset");
            const std::string cmd = cfg.command;
            cfg = run_config_from_json(j, cfg);
            cfg.command = cmd;
        }
        if (seed != 0 || app.get_subcommands().front()->count("--seed") > 0) cfg.problem.seed = seed;
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (workers > 0) cfg.workers = workers;
        if (n_points > 0) cfg.problem.n_points = n_points;
        if (n_boundary > 0) cfg.problem.n_boundary = n_boundary;
        if (!factorization.empty()) cfg.problem.factorization = factorization_from_string(factorization);
        if (!std::isnan(lambda_min)) cfg.scan.lambda_min = lambda_min;
        if (!std::isnan(lambda_max)) cfg.scan.lambda_max = lambda_max;
        if (steps > 0) cfg.scan.steps = steps;
        if (!lambda0.empty()) cfg.newton.lambda0 = lambda0;
        if (grid_max >= 0) cfg.newton.grid_max = grid_max;
        if (!std::isnan(tol)) cfg.newton.tol = cfg.eigenfunction.tol = tol;
        if (max_iter > 0) cfg.newton.max_iter = max_iter;
        if (!std::isnan(lambda)) cfg.multiplicity.lambda = cfg.eigenfunction.lambda = lambda;
        if (!anchors.empty()) cfg.multiplicity.n_anchors = anchors;
        if (n1 > 0) cfg.multiplicity.n1 = n1;
        if (n2 > 0) cfg.multiplicity.n2 = n2;
        if (!std::isnan(cutoff)) cfg.multiplicity.cutoff = cutoff;
        if (!seeds.empty())
            cfg.multiplicity.seeds = seeds;
        else if (app.get_subcommands().front()->count("--seed") > 0)
            cfg.multiplicity.seeds = {cfg.problem.seed};
        if (refine) cfg.eigenfunction.refine = true;
        if (dump_phi) cfg.eigenfunction.dump_phi = true;

        cfg.problem.validate();
        fs::create_directories(cfg.out_dir);

        if (cfg.command == "cloud") return cmd_cloud(cfg);
        if (cfg.command == "scan") return cmd_scan(cfg);
        if (cfg.command == "newton") return cmd_newton(cfg);
        if (cfg.command == "multiplicity") return cmd_multiplicity(cfg);
        if (cfg.command == "eigenfunction") return cmd_eigenfunction(cfg);
        throw ConfigError("unknown command " + cfg.command);
    } catch (const NumericError& e) {
        std::cerr << "numerical failure: " << e.what();
        if (e.has_lambda()) std::cerr << " (lambda = " << e.lambda() << ")";
        std::cerr << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 1;
    } catch (const ResourceError& e) {
        std::cerr << "resource limit: " << e.what() << "\n";
        return 1;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
