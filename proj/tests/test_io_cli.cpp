#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ppts/cli.hpp"
#include "ppts/errors.hpp"
#include "ppts/io.hpp"
#include "ppts/rng.hpp"
#include "ppts/simulate.hpp"

using namespace ppts;
namespace fs = std::filesystem;

static fs::path test_dir() {
    fs::path dir = fs::temp_directory_path() / "ppts_io_tests";
    fs::create_directories(dir);
    return dir;
}

static std::string write_file(const std::string& name, const std::string& content) {
    fs::path p = test_dir() / name;
    std::ofstream out(p);
    out << content;
    return p.string();
}

static std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

static std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) out.push_back(line);
    return out;
}

static std::vector<std::string> cells_of(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

TEST_CASE("presliced events loader") {
    std::string path = write_file("basic.csv", "day,u\n1,8.5\n1,17.9\n3,12.0\n");
    PatternSeries s = load_events(path);
    REQUIRE(s.n() == 3);
    CHECK(s.patterns[0].count() == 2);
    CHECK(s.patterns[1].count() == 0);
    CHECK(s.patterns[2].count() == 1);
    CHECK(s.patterns[0].points[0] == 8.5);
    CHECK(s.patterns[0].points[1] == 17.9);
    CHECK(s.patterns[2].points[0] == 12.0);

    // boundary values of the half-open interval
    std::string edge = write_file("edge.csv", "day,u\n1,0\n1,23.999\n");
    CHECK(load_events(edge).patterns[0].count() == 2);

    auto expect_line = [](const std::string& path, long line) {
        try {
            load_events(path);
            FAIL("expected parse_error");
        } catch (const parse_error& e) {
            CHECK(e.line == line);
            CHECK(std::string(e.what()).find("line " + std::to_string(line)) !=
                  std::string::npos);
        }
    };
    expect_line(write_file("bad_u.csv", "day,u\n1,8.5\n1,24.0\n"), 3);
    expect_line(write_file("bad_day.csv", "day,u\n0,8.5\n"), 2);
    expect_line(write_file("bad_num.csv", "day,u\n1,abc\n"), 2);
    expect_line(write_file("bad_cols.csv", "day,u\n1,2,3\n"), 2);
    expect_line(write_file("bad_frac_day.csv", "day,u\n1.5,8.0\n"), 2);
    expect_line(write_file("neg_u.csv", "day,u\n1,-0.1\n"), 2);
    expect_line(write_file("empty.csv", ""), 1);
    expect_line(write_file("header_only.csv", "day,u\n"), 2);
    expect_line(write_file("bad_header.csv", "time,u\n1,2\n"), 1);

    CHECK_THROWS_AS(load_events((test_dir() / "missing.csv").string()), error);
}

TEST_CASE("raw timestamp loader") {
    std::string path = write_file(
        "raw.csv", "timestamp\n2016-01-01T00:00:00\n2016-06-01T07:30:00\n2016-01-01 18:15\n");
    PatternSeries s = load_events(path);
    REQUIRE(s.n() == 153);  // 2016 is a leap year
    CHECK(s.patterns[0].count() == 2);
    CHECK(s.patterns[0].points[1] == 18.25);
    CHECK(s.patterns[152].count() == 1);
    CHECK(s.patterns[152].points[0] == 7.5);

    // a day boundary at 05:00 folds small hours onto the previous day
    std::string shifted = write_file(
        "raw_shift.csv", "timestamp\n2016-01-01T12:00:00\n2016-01-02T03:00:00\n");
    PatternSeries sh = load_events(shifted, EventsMode::raw, RawSliceRule{5.0, 1.0});
    REQUIRE(sh.n() == 1);
    REQUIRE(sh.patterns[0].count() == 2);
    CHECK(sh.patterns[0].points[0] == 7.0);
    CHECK(sh.patterns[0].points[1] == 22.0);

    // clock scale compresses the within-day domain
    PatternSeries sc = load_events(shifted, EventsMode::raw, RawSliceRule{5.0, 0.5});
    CHECK(sc.patterns[0].points[0] == 3.5);
    CHECK(sc.patterns[0].points[1] == 11.0);

    auto expect_line = [](const std::string& path, long line) {
        try {
            load_events(path);
            FAIL("expected parse_error");
        } catch (const parse_error& e) {
            CHECK(e.line == line);
        }
    };
    expect_line(write_file("raw_bad.csv", "timestamp\n2016-13-01T00:00:00\n"), 2);
    expect_line(write_file("raw_trunc.csv", "timestamp\n2016-06-01\n"), 2);
    expect_line(write_file("raw_feb.csv", "timestamp\n2015-02-29T10:00:00\n"), 2);
    expect_line(write_file("raw_hours.csv", "timestamp\n2016-06-01T24:00:00\n"), 2);
    expect_line(write_file("raw_garbled.csv", "timestamp\nyesterday\n"), 2);
}

TEST_CASE("days from civil handles leap rules") {
    CHECK(days_from_civil(2016, 6, 1) - days_from_civil(2016, 1, 1) == 152);
    CHECK(days_from_civil(2016, 3, 1) - days_from_civil(2016, 2, 28) == 2);
    CHECK(days_from_civil(2015, 3, 1) - days_from_civil(2015, 2, 28) == 1);
    CHECK(days_from_civil(2000, 3, 1) - days_from_civil(2000, 2, 28) == 2);
    CHECK(days_from_civil(1900, 3, 1) - days_from_civil(1900, 2, 28) == 1);
    CHECK(days_from_civil(2017, 1, 1) - days_from_civil(2016, 1, 1) == 366);
    CHECK(days_from_civil(2016, 1, 2) - days_from_civil(2016, 1, 1) == 1);
}

TEST_CASE("format double round trips") {
    const double values[] = {0.0,
                             -0.0,
                             1.0,
                             -1.0,
                             0.1,
                             1.0 / 3.0,
                             2.5825,
                             -5.45,
                             12.54,
                             1e-300,
                             1e300,
                             5e-324,
                             1.7976931348623157e308,
                             0.30000000000000004};
    for (double x : values) {
        std::string s = format_double(x);
        double back = std::strtod(s.c_str(), nullptr);
        CHECK(back == x);
    }
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(0.5) == "0.5");
    CHECK(format_double(-2.0) == "-2");
}

TEST_CASE("fit document round trips losslessly") {
    FitDocument doc;
    doc.config = "{\"alpha\":0.05,\"d\":3}";
    doc.n = 12;
    doc.d = 3;
    doc.p = 4;
    doc.q = 2;
    Rng rng(81);
    doc.theta.resize(3, 4);
    for (long i = 0; i < doc.theta.size(); ++i) doc.theta(i / 4, i % 4) = rng.normal() / 3.0;
    doc.eta.resize(2);
    doc.eta << std::sqrt(2.0), -1.0 / 3.0;
    doc.mu = doc.theta.colwise().mean().transpose();
    doc.seasonal = doc.theta.rowwise() - doc.mu.transpose();
    doc.has_omega = true;
    for (int j = 0; j < 3; ++j) {
        Eigen::MatrixXd A(4, 4);
        for (long i = 0; i < 16; ++i) A(i / 4, i % 4) = rng.normal();
        doc.omega_theta.push_back(A * A.transpose());
    }
    doc.omega_eta.resize(2, 2);
    doc.omega_eta << 3.141592653589793, 0.1, 0.1, 2.0 / 7.0;
    doc.converged = true;
    doc.iterations = 9;
    doc.gradient_norm = 3.1e-12;
    doc.objective_value = -19.4517823456789;
    doc.ridged_seasons = {2};

    fs::path p = test_dir() / "doc.json";
    write_fit_document(p.string(), doc);
    FitDocument back = read_fit_document(p.string());

    CHECK(back.format_version == doc.format_version);
    CHECK(back.n == doc.n);
    CHECK(back.d == doc.d);
    CHECK(back.p == doc.p);
    CHECK(back.q == doc.q);
    CHECK((back.theta - doc.theta).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.eta - doc.eta).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.mu - doc.mu).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.seasonal - doc.seasonal).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(back.has_omega);
    for (int j = 0; j < 3; ++j)
        CHECK((back.omega_theta[j] - doc.omega_theta[j]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.omega_eta - doc.omega_eta).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.converged == doc.converged);
    CHECK(back.iterations == doc.iterations);
    CHECK(back.gradient_norm == doc.gradient_norm);
    CHECK(back.objective_value == doc.objective_value);
    CHECK(back.ridged_seasons == doc.ridged_seasons);

    // writing the reread document reproduces the file byte for byte
    fs::path p2 = test_dir() / "doc2.json";
    write_fit_document(p2.string(), back);
    CHECK(read_file(p2.string()) == read_file(p.string()));

    // a document without covariance blocks
    doc.has_omega = false;
    doc.omega_theta.clear();
    doc.omega_eta.resize(0, 0);
    write_fit_document(p.string(), doc);
    CHECK_FALSE(read_fit_document(p.string()).has_omega);

    CHECK_THROWS_AS(read_fit_document((test_dir() / "missing.json").string()), error);
    std::string bad_version = write_file("bad_version.json", "{\"format_version\": 2}");
    CHECK_THROWS_AS(read_fit_document(bad_version), error);
    std::string not_json = write_file("not_json.json", "{nope");
    CHECK_THROWS_AS(read_fit_document(not_json), error);
}

static std::string simulated_events(const std::string& name, long n, std::uint64_t seed) {
    SimModel m = preset_model("i", n, seed);
    std::vector<PointPattern> pats = simulate_patterns(m, Rng(seed).stream(1));
    std::ostringstream out;
    out << "day,u\n";
    for (long t = 1; t <= n; ++t)
        for (double u : pats[t - 1].points) out << t << "," << format_double(u) << "\n";
    return write_file(name, out.str());
}

TEST_CASE("cli validates arguments and files") {
    std::string events = simulated_events("cli_ev.csv", 20, 4);
    std::string config = write_file("cli_cfg.json", "{}");
    std::string out = (test_dir() / "cli_out.json").string();

    CHECK(run_cli({}) == 64);
    CHECK(run_cli({"frobnicate"}) == 64);
    CHECK(run_cli({"fit", "--events", events, "--config", config}) == 64);
    CHECK(run_cli({"fit", "--events", events, "--config", config, "--out", out,
                   "--bogus"}) == 64);
    CHECK(run_cli({"simulate", "--scenario", "iv", "--n", "10", "--reps", "5", "--seed", "1",
                   "--out", out}) == 64);
    CHECK(run_cli({"simulate", "--scenario", "i", "--n", "10", "--reps", "1", "--seed", "1",
                   "--out", out}) == 64);

    std::string missing = (test_dir() / "nope.csv").string();
    CHECK(run_cli({"fit", "--events", missing, "--config", config, "--out", out}) == 66);
    CHECK(run_cli({"fit", "--events", events, "--config", missing, "--out", out}) == 66);
    CHECK(run_cli({"bands", "--fit", missing, "--out", out}) == 66);
    CHECK(run_cli({"plot-data", "--fit", missing, "--out", out}) == 66);
}

TEST_CASE("cli rejects malformed data and config") {
    std::string events = simulated_events("cfg_ev.csv", 20, 5);
    std::string out = (test_dir() / "cfg_out.json").string();

    auto fit_with_config = [&](const std::string& cfg) {
        std::string path = write_file("cfg_case.json", cfg);
        return run_cli({"fit", "--events", events, "--config", path, "--out", out});
    };

    CHECK(fit_with_config("{\"bogus\": 1}") == 65);
    CHECK(fit_with_config("{\"trend\": {\"mode\": \"residue\", \"weird\": 1}}") == 65);
    CHECK(fit_with_config("{\"trend\": {\"mode\": \"normalized\", \"r\": 20}}") == 65);
    CHECK(fit_with_config("{\"trend\": {\"mode\": \"residue\", \"n\": 20}}") == 65);
    CHECK(fit_with_config("{\"trend\": {\"mode\": \"diagonal\"}}") == 65);
    CHECK(fit_with_config("{\"d\": 2, \"trend\": {\"mode\": \"residue\", \"r\": 7}}") == 65);
    CHECK(fit_with_config("{\"d\": 0}") == 65);
    CHECK(fit_with_config("{\"d\": 21}") == 65);
    CHECK(fit_with_config("{\"optimizer\": {\"tol\": 0}}") == 65);
    CHECK(fit_with_config("{\"optimizer\": {\"max_iter\": 0}}") == 65);
    CHECK(fit_with_config("{\"alpha\": 1.5}") == 65);
    CHECK(fit_with_config("{\"domain\": [0]}") == 65);
    CHECK(fit_with_config("{\"interior_knots\": \"two\"}") == 65);
    CHECK(fit_with_config("{\"quadrature\": {\"panels\": 3}}") == 65);
    CHECK(fit_with_config("[1, 2]") == 65);
    CHECK(fit_with_config("{nope") == 65);

    std::string cfg = write_file("cfg_ok.json", "{}");
    std::string bad_events = write_file("cfg_bad_events.csv", "day,u\n1,8.5\n2,24.0\n");
    CHECK(run_cli({"fit", "--events", bad_events, "--config", cfg, "--out", out}) == 65);
    std::string bad_header = write_file("cfg_bad_header.csv", "col_a,col_b\n1,2\n");
    CHECK(run_cli({"fit", "--events", bad_header, "--config", cfg, "--out", out}) == 65);
}

TEST_CASE("cli fit bands and plot data") {
    std::string events = simulated_events("flow_ev.csv", 60, 2);
    std::string config = write_file(
        "flow_cfg.json",
        "{\"spline_degree\": 3, \"interior_knots\": 2, \"d\": 1,"
        " \"trend\": {\"mode\": \"residue\", \"q\": 2}}");
    std::string fit_path = (test_dir() / "flow_fit.json").string();

    REQUIRE(run_cli({"fit", "--events", events, "--config", config, "--out", fit_path}) == 0);
    FitDocument doc = read_fit_document(fit_path);
    CHECK(doc.converged);
    CHECK(doc.d == 1);
    CHECK(doc.p == 6);
    CHECK(doc.q == 2);
    CHECK(doc.has_omega);
    CHECK(doc.theta.allFinite());

    // refitting writes the identical document
    std::string fit2 = (test_dir() / "flow_fit2.json").string();
    REQUIRE(run_cli({"fit", "--events", events, "--config", config, "--out", fit2}) == 0);
    CHECK(read_file(fit2) == read_file(fit_path));

    std::string bands_path = (test_dir() / "flow_bands.csv").string();
    REQUIRE(run_cli({"bands", "--fit", fit_path, "--alpha", "0.05", "--out", bands_path}) ==
            0);
    std::vector<std::string> rows = lines_of(read_file(bands_path));
    REQUIRE(rows.size() == 1 + static_cast<std::size_t>(doc.n) + 241);
    CHECK(rows[0] == "kind,t,j,u,estimate,lo,hi");

    // residue-mode trend band at t = 1 collapses onto the anchored estimate
    std::vector<std::string> first = cells_of(rows[1]);
    REQUIRE(first.size() == 7);
    CHECK(first[0] == "trend");
    CHECK(first[1] == "1");
    CHECK(first[4] == "0");
    CHECK(first[5] == "0");
    CHECK(first[6] == "0");

    double max_width = 0.0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        std::vector<std::string> c = cells_of(rows[i]);
        REQUIRE(c.size() == 7);
        double est = std::strtod(c[4].c_str(), nullptr);
        double lo = std::strtod(c[5].c_str(), nullptr);
        double hi = std::strtod(c[6].c_str(), nullptr);
        CHECK(lo <= est);
        CHECK(est <= hi);
        if (c[0] == "intensity") {
            CHECK(est > 0.0);
            max_width = std::max(max_width, hi - lo);
        }
    }
    CHECK(max_width > 0.0);

    // a looser level gives a strictly narrower band where the width is positive
    std::string loose_path = (test_dir() / "flow_loose.csv").string();
    REQUIRE(run_cli({"bands", "--fit", fit_path, "--alpha", "0.2", "--out", loose_path}) == 0);
    std::vector<std::string> loose = lines_of(read_file(loose_path));
    REQUIRE(loose.size() == rows.size());
    std::vector<std::string> tight_row = cells_of(rows[2]), loose_row = cells_of(loose[2]);
    double tight_width = std::strtod(tight_row[6].c_str(), nullptr) -
                         std::strtod(tight_row[5].c_str(), nullptr);
    double loose_width = std::strtod(loose_row[6].c_str(), nullptr) -
                         std::strtod(loose_row[5].c_str(), nullptr);
    CHECK(loose_width < tight_width);

    std::string plot_path = (test_dir() / "flow_plot.csv").string();
    REQUIRE(run_cli({"plot-data", "--fit", fit_path, "--out", plot_path}) == 0);
    std::vector<std::string> plot = lines_of(read_file(plot_path));
    REQUIRE(plot.size() == 1 + static_cast<std::size_t>(doc.n) + 241);
    CHECK(plot[0] == "kind,j,x,y");
    std::vector<std::string> trend1 = cells_of(plot[1]);
    CHECK(trend1[0] == "trend");
    CHECK(trend1[3] == "1");  // exp of the anchored trend at day one
    long intensity_rows = 0;
    for (std::size_t i = 1; i < plot.size(); ++i) {
        std::vector<std::string> c = cells_of(plot[i]);
        if (c[0] == "intensity") {
            ++intensity_rows;
            CHECK(std::strtod(c[3].c_str(), nullptr) > 0.0);
        }
    }
    CHECK(intensity_rows == 241);

    // bands refuse documents without covariance blocks
    doc.has_omega = false;
    doc.omega_theta.clear();
    doc.omega_eta.resize(0, 0);
    std::string no_omega = (test_dir() / "flow_noomega.json").string();
    write_fit_document(no_omega, doc);
    CHECK(run_cli({"bands", "--fit", no_omega, "--out", bands_path}) == 65);
}

TEST_CASE("cli simulate is deterministic") {
    std::string out1 = (test_dir() / "sim1.csv").string();
    std::string out2 = (test_dir() / "sim2.csv").string();
    std::string out3 = (test_dir() / "sim3.csv").string();
    std::vector<std::string> base = {"simulate", "--scenario", "iii", "--n", "30",
                                     "--reps",   "8",          "--seed", "7"};
    std::vector<std::string> a1 = base;
    a1.insert(a1.end(), {"--out", out1});
    std::vector<std::string> a2 = base;
    a2.insert(a2.end(), {"--out", out2});
    std::vector<std::string> a3 = base;
    a3.insert(a3.end(), {"--workers", "3", "--out", out3});
    REQUIRE(run_cli(a1) == 0);
    REQUIRE(run_cli(a2) == 0);
    REQUIRE(run_cli(a3) == 0);

    std::string text = read_file(out1);
    CHECK(text == read_file(out2));
    CHECK(text == read_file(out3));

    std::vector<std::string> rows = lines_of(text);
    REQUIRE(rows.size() == 5);
    CHECK(rows[0] == "scenario,n,target,bias,sd,rmse");
    const char* targets[] = {"theta", "eta", "intensity", "trend"};
    for (int i = 0; i < 4; ++i) {
        std::vector<std::string> c = cells_of(rows[i + 1]);
        REQUIRE(c.size() == 6);
        CHECK(c[0] == "iii");
        CHECK(c[1] == "30");
        CHECK(c[2] == targets[i]);
        double bias = std::strtod(c[3].c_str(), nullptr);
        double sd = std::strtod(c[4].c_str(), nullptr);
        double rmse = std::strtod(c[5].c_str(), nullptr);
        CHECK(std::abs(rmse * rmse - bias * bias - sd * sd) < 1e-10);
    }
}
