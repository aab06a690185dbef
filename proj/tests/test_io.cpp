#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "hbeig/io.hpp"

using namespace hbeig;

TEST(FmtDouble, RoundTripsExactly) {
    for (double v : {0.0, 1.0, -2.5, 0.1, 1.0 / 3.0, 2.404825557695773, 6.02214076e23, 5e-324,
                     std::nextafter(1.0, 2.0)}) {
        EXPECT_EQ(std::strtod(fmt_double(v).c_str(), nullptr), v) << fmt_double(v);
    }
    EXPECT_EQ(fmt_double(0.5), "0.5");
    EXPECT_EQ(fmt_double(56.0), "56");
}

TEST(CloudCsv, RoundTripIsBitIdentical) {
    const Shape s = Shape::wavy_catenoid();
    PointCloud c = generate_boundary_cloud(s, {20, 10, 0.0, 42, true});
    std::ostringstream os;
    write_cloud_csv(os, c, csv_comment_header(json{{"k", 1}}, 42));
    std::istringstream is(os.str());
    const PointCloud back = read_cloud_csv(is);
    EXPECT_EQ(back.seed, 42u);
    EXPECT_EQ(back.points, c.points);
    EXPECT_EQ(back.normals, c.normals);
    EXPECT_EQ(back.conormals, c.conormals);
    EXPECT_EQ(back.curvature, c.curvature);
    std::ostringstream again;
    write_cloud_csv(again, back, csv_comment_header(json{{"k", 1}}, 42));
    EXPECT_EQ(again.str(), os.str());
}

TEST(CloudCsv, ColumnSubsets) {
    PointCloud c;
    c.points = {Vec3(1, 2, 3)};
    c.curvature = {0.5};
    std::ostringstream os;
    write_cloud_csv(os, c);
    EXPECT_EQ(os.str(), "x,y,z,kappa\n1,2,3,0.5\n");
    std::istringstream is(os.str());
    const PointCloud back = read_cloud_csv(is);
    EXPECT_EQ(back.curvature, c.curvature);
    EXPECT_FALSE(back.has_normals());
}

TEST(CloudCsv, RejectsMalformedInput) {
    for (const char* bad : {"a,b,c\n", "x,y,z,nx\n1,2,3,4\n", "x,y,z,kappa,nx,ny,nz\n", "x,y,z\n1,2\n",
                            "x,y,z\n1,2,zz\n"}) {
        std::istringstream is(bad);
        EXPECT_THROW(read_cloud_csv(is), ConfigError) << bad;
    }
}

TEST(ScanCsv, RoundTripWithFailures) {
    std::vector<ScanPoint> pts{{0.0, 1.5, -0.25, true}, {0.5, 0.0, 0.0, false}, {1.0, 3e10, 7.0, true}};
    std::ostringstream os;
    write_scan_csv(os, pts, "# seed: 1\n");
    EXPECT_NE(os.str().find("lambda,norm_sq,dnorm_sq,factorization_ok\n"), std::string::npos);
    EXPECT_NE(os.str().find("0.5,nan,nan,0\n"), std::string::npos);
    std::istringstream is(os.str());
    const auto back = read_scan_csv(is);
    ASSERT_EQ(back.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(back[i].lambda, pts[i].lambda);
        EXPECT_EQ(back[i].ok, pts[i].ok);
        if (pts[i].ok) {
            EXPECT_EQ(back[i].norm_sq, pts[i].norm_sq);
            EXPECT_EQ(back[i].d1, pts[i].d1);
        }
    }
}

TEST(NewtonCsv, TraceColumns) {
    NewtonResult r;
    r.history = {{0, 1.0, 2.0, 3.0, 4.0, -0.75}, {1, 0.25, 1.0, 0.0, 4.0, 0.0}};
    std::ostringstream os;
    write_newton_trace_csv(os, r);
    EXPECT_EQ(os.str(), "iter,lambda,norm_sq,d1,d2,step\n0,1,2,3,4,-0.75\n1,0.25,1,0,4,0\n");
}

TEST(Svg, PureFunctionOfTheScan) {
    std::vector<ScanPoint> pts;
    for (int i = 0; i <= 20; ++i) {
        const double l = i * 0.1;
        pts.push_back({l, 1.0 + 1e4 * (l - 1.0) * (l - 1.0), 0.0, i != 7});
    }
    const std::string a = scan_svg(pts);
    EXPECT_EQ(a, scan_svg(pts));
    EXPECT_EQ(a.rfind("<svg", 0), 0u);
    EXPECT_NE(a.find("</svg>"), std::string::npos);
    // The failed point splits the curve in two polylines.
    std::size_t count = 0;
    for (std::size_t p = a.find("<polyline"); p != std::string::npos; p = a.find("<polyline", p + 1)) ++count;
    EXPECT_EQ(count, 2u);

    std::ostringstream os;
    write_scan_csv(os, pts);
    std::istringstream is(os.str());
    EXPECT_EQ(scan_svg(read_scan_csv(is)), a);
}

TEST(Config, ProblemJsonRoundTrip) {
    for (const std::string& name : preset_names()) {
        const ProblemSpec p = preset(name);
        const json j = to_json(p);
        const ProblemSpec q = problem_from_json(j, ProblemSpec{});
        EXPECT_EQ(to_json(q).dump(), j.dump()) << name;
    }
}

TEST(Config, PresetThenOverrides) {
    const json j = json::parse(R"({"preset": "disk-steklov", "n_points": 100, "seed": 9,
                                   "weight_params": {"q": 3}})");
    const ProblemSpec p = problem_from_json(j, ProblemSpec{});
    EXPECT_EQ(p.family, Family::steklov_flat);
    EXPECT_EQ(p.n_points, 100);
    EXPECT_EQ(p.seed, 9u);
    EXPECT_EQ(p.weight_params.q, 3.0);
    EXPECT_EQ(p.weight_params.T, 1.0);
}

TEST(Config, StrictKeysAndTypes) {
    EXPECT_THROW(problem_from_json(json::parse(R"({"n_point": 3})"), {}), ConfigError);
    EXPECT_THROW(problem_from_json(json::parse(R"({"basis_spec": {"K": 3}})"), {}), ConfigError);
    EXPECT_THROW(problem_from_json(json::parse(R"({"n_points": "many"})"), {}), ConfigError);
    EXPECT_THROW(problem_from_json(json::parse(R"({"family": "heat"})"), {}), ConfigError);
    EXPECT_THROW(problem_from_json(json::parse(R"({"preset": "nope"})"), {}), ConfigError);
    std::istringstream bad("{not json");
    EXPECT_THROW(parse_run_config(bad), ConfigError);
    std::istringstream extra(R"({"command": "scan", "bogus": 1})");
    EXPECT_THROW(parse_run_config(extra), ConfigError);
}

TEST(Config, RunConfigRoundTrip) {
    RunConfig c;
    c.command = "multiplicity";
    c.problem = preset("sphere-lb");
    c.multiplicity.lambda = 56;
    c.multiplicity.n_anchors = {15, 16};
    c.multiplicity.seeds = {1, 2, 3};
    c.newton.lambda0 = {2.0, 6.5};
    c.workers = 3;
    c.out_dir = "results";
    std::istringstream is(to_json(c).dump(2));
    const RunConfig d = parse_run_config(is);
    EXPECT_EQ(to_json(d).dump(), to_json(c).dump());
}

TEST(Config, NewtonGridStarts) {
    NewtonParams p;
    p.grid_min = 0;
    p.grid_max = 4;
    EXPECT_EQ(p.starts(), (std::vector<double>{0.0, 0.25, 1.0, 2.25, 4.0}));
    p.lambda0 = {3.0};
    EXPECT_EQ(p.starts(), std::vector<double>{3.0});
}

TEST(Header, CarriesVersionSeedAndConfig) {
    const std::string h = csv_comment_header(json{{"a", 1}}, 77);
    EXPECT_EQ(h, std::string("# hbeig ") + kVersion + "\n# seed: 77\n# config: {\"a\":1}\n");
}

TEST(MultiplicityCsv, Columns) {
    MultiplicityReport r;
    r.lambda = 56;
    r.n_anchors = 15;
    r.n1 = 800;
    r.n2 = 889;
    r.seed = 2;
    r.norm_sq1 = 1.0;
    r.norm_sq2 = 1.0;
    r.ratio = 1.0;
    r.verdict = Verdict::at_least_na;
    std::ostringstream os;
    write_multiplicity_csv(os, {r});
    EXPECT_EQ(os.str(), "lambda,n_anchors,n1,n2,seed,norm_sq1,norm_sq2,ratio,verdict\n"
                        "56,15,800,889,2,1,1,1,at_least_na\n");
}
