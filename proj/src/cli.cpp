#include "ppts/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <string>

#include "ppts/covariance.hpp"
#include "ppts/errors.hpp"
#include "ppts/io.hpp"
#include "ppts/model.hpp"
#include "ppts/simulate.hpp"

namespace ppts {

namespace {

using nlohmann::json;

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& ctx) {
    if (!obj.is_object())
        throw config_error((ctx.empty() ? std::string("config") : ctx) + " must be a JSON object");
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* k : allowed) known = known || item.key() == k;
        if (!known) throw config_error("unknown config key '" + ctx + item.key() + "'");
    }
}

struct Analysis {
    BasisSpec basis;
    TrendSpec trend;
    SeasonIndexer indexer;
    int nodes_per_panel = 10;
    FitConfig fitcfg;
    double alpha = 0.05;
    json effective;
};

Analysis build_analysis(const json& cfg, long n_days) {
    check_keys(cfg, {"domain", "spline_degree", "interior_knots", "d", "trend", "quadrature",
                     "optimizer", "alpha"},
               "");
    Analysis out;

    json domain = cfg.value("domain", json::array({0.0, 24.0}));
    if (!domain.is_array() || domain.size() != 2 || !domain[0].is_number() ||
        !domain[1].is_number())
        throw config_error("domain must be an array of two numbers");
    double lo = domain[0].get<double>(), hi = domain[1].get<double>();
    int degree = cfg.value("spline_degree", 3);

    json knots = cfg.value("interior_knots", json(2));
    if (knots.is_number_integer()) {
        out.basis = make_bspline_basis(lo, hi, degree, knots.get<int>());
    } else if (knots.is_array()) {
        std::vector<double> pos;
        for (const auto& k : knots) {
            if (!k.is_number()) throw config_error("interior_knots must be integers or numbers");
            pos.push_back(k.get<double>());
        }
        out.basis = make_bspline_basis(lo, hi, degree, pos);
    } else {
        throw config_error("interior_knots must be a count or an array of positions");
    }

    int d = cfg.value("d", 1);
    if (d < 1) throw config_error("d must be a positive integer");
    if (n_days < d) throw config_error("series shorter than one seasonal cycle");

    json trend = cfg.value("trend", json::object());
    check_keys(trend, {"mode", "q", "r", "n"}, "trend.");
    std::string mode = trend.value("mode", std::string("residue"));
    int q = trend.value("q", 2);
    if (q < 0) throw config_error("trend.q must be nonnegative");
    if (mode == "residue") {
        long r = trend.value("r", (n_days / d) * d);
        if (r <= 0 || r % d != 0)
            throw config_error("trend.r must be a positive multiple of d");
        if (trend.contains("n")) throw config_error("trend.n applies to normalized mode only");
        out.trend = TrendSpec{TrendMode::residue, q, r, 0};
        out.indexer = SeasonIndexer(d, r);
    } else if (mode == "normalized") {
        long nn = trend.value("n", n_days);
        if (nn <= 0) throw config_error("trend.n must be positive");
        if (trend.contains("r")) throw config_error("trend.r applies to residue mode only");
        out.trend = TrendSpec{TrendMode::normalized, q, 0, nn};
        out.indexer = SeasonIndexer(d, 0);
    } else {
        throw config_error("trend.mode must be 'residue' or 'normalized'");
    }

    json quad = cfg.value("quadrature", json::object());
    check_keys(quad, {"nodes_per_panel"}, "quadrature.");
    out.nodes_per_panel = quad.value("nodes_per_panel", 10);

    json opt = cfg.value("optimizer", json::object());
    check_keys(opt, {"tol", "max_iter", "ridge"}, "optimizer.");
    out.fitcfg.tol = opt.value("tol", 1e-8);
    out.fitcfg.max_iter = opt.value("max_iter", 100);
    out.fitcfg.ridge = opt.value("ridge", 1e-6);
    if (!(out.fitcfg.tol > 0)) throw config_error("optimizer.tol must be positive");
    if (out.fitcfg.max_iter < 1) throw config_error("optimizer.max_iter must be positive");
    if (out.fitcfg.ridge < 0) throw config_error("optimizer.ridge must be nonnegative");

    out.alpha = cfg.value("alpha", 0.05);
    if (!(out.alpha > 0.0 && out.alpha < 1.0)) throw config_error("alpha must lie in (0, 1)");

    out.effective = {
        {"domain", {lo, hi}},
        {"spline_degree", degree},
        {"interior_knots", knots},
        {"d", d},
        {"trend",
         out.trend.mode == TrendMode::residue
             ? json{{"mode", "residue"}, {"q", q}, {"r", out.trend.r}}
             : json{{"mode", "normalized"}, {"q", q}, {"n", out.trend.n}}},
        {"quadrature", {{"nodes_per_panel", out.nodes_per_panel}}},
        {"optimizer",
         {{"tol", out.fitcfg.tol}, {"max_iter", out.fitcfg.max_iter},
          {"ridge", out.fitcfg.ridge}}},
        {"alpha", out.alpha}};
    return out;
}

bool require_file(const std::string& path) {
    if (std::filesystem::exists(path)) return true;
    std::cerr << "error: no such file: " << path << "\n";
    return false;
}

EventsMode sniff_mode(const std::string& path) {
    std::ifstream in(path);
    std::string header;
    if (!std::getline(in, header)) throw parse_error(1, "empty events file");
    if (!header.empty() && header.back() == '\r') header.pop_back();
    if (header == "day,u") return EventsMode::presliced;
    if (header == "timestamp") return EventsMode::raw;
    throw parse_error(1, "unrecognized header '" + header + "' (expected 'day,u' or 'timestamp')");
}

struct FitArgs {
    std::string events, config, out;
    double day_boundary = 0.0;
    double clock_scale = 1.0;
};

int do_fit(const FitArgs& a) {
    if (!require_file(a.events) || !require_file(a.config)) return 66;
    json cfg;
    {
        std::ifstream in(a.config);
        try {
            in >> cfg;
        } catch (const std::exception& e) {
            throw config_error("invalid config JSON: " + std::string(e.what()));
        }
    }
    PatternSeries series =
        load_events(a.events, sniff_mode(a.events), RawSliceRule{a.day_boundary, a.clock_scale});
    Analysis an = build_analysis(cfg, series.n());
    series.indexer = an.indexer;
    series.trend = an.trend;
    QuadGrid grid = default_grid(an.basis, an.nodes_per_panel);
    FitResult fr = fit(series, an.basis, grid, an.fitcfg);

    FitDocument doc;
    doc.config = an.effective.dump();
    doc.n = fr.n;
    doc.d = fr.params.d();
    doc.p = fr.params.p();
    doc.q = fr.params.q();
    doc.theta = fr.params.theta;
    doc.eta = fr.params.eta;
    doc.mu = fr.mu;
    doc.seasonal = fr.seasonal;
    doc.converged = fr.converged;
    doc.iterations = fr.iterations;
    doc.gradient_norm = fr.gradient_norm;
    doc.objective_value = fr.objective_value;
    doc.ridged_seasons = fr.ridged_seasons;
    if (fr.converged) {
        try {
            Eigen::MatrixXd W = plug_in_W(fr, series, an.basis, grid);
            Eigen::MatrixXd V = empirical_V(series, fr, an.basis, grid);
            SandwichParts parts = make_sandwich(V, W, doc.d, doc.p, doc.q);
            doc.has_omega = true;
            for (int j = 0; j < doc.d; ++j)
                doc.omega_theta.push_back(parts.Omega.block(static_cast<long>(j) * doc.p,
                                                            static_cast<long>(j) * doc.p,
                                                            doc.p, doc.p));
            doc.omega_eta = parts.Omega.block(static_cast<long>(doc.d) * doc.p,
                                              static_cast<long>(doc.d) * doc.p, doc.q, doc.q);
        } catch (const singular_error& e) {
            std::cerr << "warning: covariance unavailable: " << e.what() << "\n";
        }
    }
    write_fit_document(a.out, doc);
    if (!fr.converged) {
        std::cerr << "warning: optimizer did not converge after " << fr.iterations
                  << " iterations (gradient norm " << fr.gradient_norm << ")\n";
        return 2;
    }
    return 0;
}

struct SimulateArgs {
    std::string scenario = "i";
    long n = 300;
    int reps = 300;
    std::uint64_t seed = 1;
    int workers = 1;
    std::string out;
};

int do_simulate(const SimulateArgs& a) {
    SimModel model = preset_model(a.scenario, a.n, a.seed);
    ErrorSummary s = run_study(model, a.reps, FitConfig{}, a.workers);
    std::ofstream out(a.out);
    if (!out) throw error("cannot write summary '" + a.out + "'");
    out << "scenario,n,target,bias,sd,rmse\n";
    auto row = [&](const char* target, const ErrorRow& r) {
        out << s.scenario << "," << s.n << "," << target << "," << format_double(r.bias) << ","
            << format_double(r.sd) << "," << format_double(r.rmse) << "\n";
    };
    row("theta", s.theta);
    row("eta", s.eta);
    row("intensity", s.intensity);
    row("trend", s.trend);
    if (!out) throw error("failed writing summary '" + a.out + "'");
    if (s.excluded > 0)
        std::cerr << "note: excluded " << s.excluded << " non-converged replicates\n";
    return 0;
}

struct BandsArgs {
    std::string fit, out;
    double alpha = -1.0;  // negative = take from the fit document config
    int grid = 241;
    bool linear_variance = false;
};

int do_bands(const BandsArgs& a) {
    if (!require_file(a.fit)) return 66;
    FitDocument doc = read_fit_document(a.fit);
    if (!doc.has_omega)
        throw config_error("fit document has no covariance (non-converged fit?)");
    json cfg = json::parse(doc.config);
    Analysis an = build_analysis(cfg, doc.n);
    double alpha = a.alpha > 0 ? a.alpha : an.alpha;

    std::ofstream out(a.out);
    if (!out) throw error("cannot write bands '" + a.out + "'");
    out << "kind,t,j,u,estimate,lo,hi\n";
    for (long t = 1; t <= doc.n && doc.q > 0; ++t) {
        Eigen::VectorXd b = eval_trend(an.trend, static_cast<double>(t));
        double est = doc.eta.dot(b);
        auto [lo, hi] = band_trend_block(est, b, doc.omega_eta, doc.n, alpha);
        out << "trend," << t << ",,," << format_double(est) << "," << format_double(lo) << ","
            << format_double(hi) << "\n";
    }
    for (int j = 1; j <= doc.d; ++j) {
        for (int i = 0; i < a.grid; ++i) {
            double u = an.basis.lo +
                       (an.basis.hi - an.basis.lo) * i / static_cast<double>(a.grid - 1);
            Eigen::VectorXd beta = eval_basis(an.basis, u);
            double lam = std::exp(doc.theta.row(j - 1).dot(beta));
            auto [lo, hi] = band_intensity_block(lam, beta, doc.omega_theta[j - 1], doc.n,
                                                 alpha, !a.linear_variance);
            out << "intensity,," << j << "," << format_double(u) << "," << format_double(lam)
                << "," << format_double(lo) << "," << format_double(hi) << "\n";
        }
    }
    if (!out) throw error("failed writing bands '" + a.out + "'");
    return 0;
}

struct PlotArgs {
    std::string fit, out;
    int grid = 241;
};

int do_plot_data(const PlotArgs& a) {
    if (!require_file(a.fit)) return 66;
    FitDocument doc = read_fit_document(a.fit);
    json cfg = json::parse(doc.config);
    Analysis an = build_analysis(cfg, doc.n);

    std::ofstream out(a.out);
    if (!out) throw error("cannot write plot data '" + a.out + "'");
    out << "kind,j,x,y\n";
    for (long t = 1; t <= doc.n; ++t) {
        double c = doc.q > 0 ? doc.eta.dot(eval_trend(an.trend, static_cast<double>(t))) : 0.0;
        out << "trend,," << t << "," << format_double(std::exp(c)) << "\n";
    }
    for (int j = 1; j <= doc.d; ++j) {
        for (int i = 0; i < a.grid; ++i) {
            double u = an.basis.lo +
                       (an.basis.hi - an.basis.lo) * i / static_cast<double>(a.grid - 1);
            double lam = std::exp(doc.theta.row(j - 1).dot(eval_basis(an.basis, u)));
            out << "intensity," << j << "," << format_double(u) << "," << format_double(lam)
                << "\n";
        }
    }
    if (!out) throw error("failed writing plot data '" + a.out + "'");
    return 0;
}

}  // namespace

int run_cli(std::vector<std::string> args) {
    CLI::App app{"trend and seasonality estimation for daily event patterns"};
    app.require_subcommand(1);

    FitArgs fa;
    CLI::App* fit_cmd = app.add_subcommand("fit", "fit the model to an events file");
    fit_cmd->add_option("--events", fa.events, "events CSV (day,u or timestamp)")->required();
    fit_cmd->add_option("--config", fa.config, "analysis config JSON")->required();
    fit_cmd->add_option("--out", fa.out, "output fit document JSON")->required();
    fit_cmd->add_option("--day-boundary", fa.day_boundary,
                        "hour offset of the day boundary for raw timestamps");
    fit_cmd->add_option("--clock-scale", fa.clock_scale,
                        "scale applied to raw within-day times");

    SimulateArgs sa;
    CLI::App* sim_cmd = app.add_subcommand("simulate", "run a Monte Carlo error study");
    sim_cmd->add_option("--scenario", sa.scenario, "scenario preset")
        ->required()
        ->check(CLI::IsMember({"i", "ii", "iii"}));
    sim_cmd->add_option("--n", sa.n, "days per replicate")->required()->check(CLI::PositiveNumber);
    sim_cmd->add_option("--reps", sa.reps, "number of replicates")
        ->required()
        ->check(CLI::Range(2, 1000000));
    sim_cmd->add_option("--seed", sa.seed, "master seed")->required();
    sim_cmd->add_option("--workers", sa.workers, "worker threads")->check(CLI::Range(1, 256));
    sim_cmd->add_option("--out", sa.out, "output summary CSV")->required();

    BandsArgs ba;
    CLI::App* bands_cmd = app.add_subcommand("bands", "pointwise confidence bands from a fit");
    bands_cmd->add_option("--fit", ba.fit, "fit document JSON")->required();
    bands_cmd->add_option("--alpha", ba.alpha, "band level (default: config alpha)");
    bands_cmd->add_option("--grid", ba.grid, "intensity grid points")->check(CLI::Range(2, 100000));
    bands_cmd->add_flag("--linear-variance", ba.linear_variance,
                        "use the linear-in-lambda variance factor");
    bands_cmd->add_option("--out", ba.out, "output CSV")->required();

    PlotArgs pa;
    CLI::App* plot_cmd = app.add_subcommand("plot-data", "curves for plotting from a fit");
    plot_cmd->add_option("--fit", pa.fit, "fit document JSON")->required();
    plot_cmd->add_option("--grid", pa.grid, "intensity grid points")->check(CLI::Range(2, 100000));
    plot_cmd->add_option("--out", pa.out, "output CSV")->required();

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 64;
    }

    try {
        if (app.got_subcommand(fit_cmd)) return do_fit(fa);
        if (app.got_subcommand(sim_cmd)) return do_simulate(sa);
        if (app.got_subcommand(bands_cmd)) return do_bands(ba);
        return do_plot_data(pa);
    } catch (const parse_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 65;
    } catch (const error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 65;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 65;
    }
}

}  // namespace ppts
