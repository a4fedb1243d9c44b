#include "ppts/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <thread>
#include <utility>

#include "ppts/errors.hpp"

namespace ppts {

namespace {

double binom(int k, int m) {
    double b = 1.0;
    for (int i = 0; i < m; ++i) b = b * (k - i) / (i + 1);
    return b;
}

// weighted squared norm; null weights = Euclidean
double sq_norm(const Eigen::VectorXd& v, const Eigen::VectorXd* w) {
    if (w == nullptr) return v.squaredNorm();
    return v.array().square().matrix().dot(*w);
}

ErrorRow summarize(const std::vector<Eigen::VectorXd>& xs, const Eigen::VectorXd& target,
                   const Eigen::VectorXd* w) {
    const double m = static_cast<double>(xs.size());
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(target.size());
    for (const auto& x : xs) mean += x;
    mean /= m;
    double var = 0.0, mse = 0.0;
    for (const auto& x : xs) {
        var += sq_norm(x - mean, w);
        mse += sq_norm(x - target, w);
    }
    ErrorRow row;
    row.bias = std::sqrt(sq_norm(mean - target, w));
    row.sd = std::sqrt(var / m);
    row.rmse = std::sqrt(mse / m);
    return row;
}

// c(t) = sum_k eta_k (t-1)^k rewritten in s = t/(n+1): coefficients of s^1..s^q
Eigen::VectorXd anchored_to_normalized(const Eigen::VectorXd& eta, long n) {
    const int q = static_cast<int>(eta.size());
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(q);
    for (int m = 1; m <= q; ++m)
        for (int k = m; k <= q; ++k) {
            double sign = ((k - m) % 2 == 0) ? 1.0 : -1.0;
            alpha[m - 1] += eta[k - 1] * binom(k, m) * std::pow(n + 1.0, m) * sign;
        }
    return alpha;
}

void validate_model(const SimModel& model) {
    if (model.n <= 0) throw config_error("simulate: series length must be positive");
    if (model.theta0.rows() < 1 || model.theta0.cols() != model.basis.p)
        throw dimension_error("simulate: theta0 must have basis.p columns");
    if (model.eta0.size() != model.trend.q)
        throw dimension_error("simulate: eta0 length must equal trend order");
    if (model.scenario == Scenario::ar1) {
        if (!(std::abs(model.a) < 1.0)) throw config_error("simulate: |a| must be below 1");
        double gap = model.sigma_eps * model.sigma_eps -
                     model.sigma * model.sigma * (1.0 - model.a * model.a);
        if (std::abs(gap) > 1e-10)
            throw config_error("simulate: sigma_eps inconsistent with sigma and a");
    }
}

}  // namespace

SimModel preset_model(const std::string& scenario, long n, std::uint64_t seed) {
    if (scenario != "i" && scenario != "ii" && scenario != "iii")
        throw config_error("unknown scenario '" + scenario + "' (use i, ii or iii)");
    SimModel m;
    m.name = scenario;
    m.basis = make_bspline_basis(0.0, 24.0, 3, 2);
    Eigen::VectorXd theta0(6);
    theta0 << -5.45, -4.96, -0.13, -4.14, -1.15, -5.52;
    m.theta0 = theta0.transpose();
    m.zeta = normalize_zeta(theta0, m.basis, default_grid(m.basis));
    m.trend = TrendSpec{TrendMode::normalized, 2, 0, n};
    m.eta0 = Eigen::VectorXd(2);
    m.eta0 << 9.38, -8.43;
    m.n = n;
    m.seed = seed;
    if (scenario == "i") {
        m.scenario = Scenario::working;
        m.tau0 = Eigen::VectorXd::Zero(6);
    } else {
        m.tau0 = Eigen::VectorXd(6);
        m.tau0 << 0.508, 0.331, -0.113, 0.270, -0.056, 0.459;
        m.sigma = 2.0;
        if (scenario == "ii") {
            m.scenario = Scenario::independent;
        } else {
            m.scenario = Scenario::ar1;
            m.a = 0.7;
            m.sigma_eps = 2.0 * std::sqrt(1.0 - 0.7 * 0.7);
        }
    }
    return m;
}

std::vector<double> ar1_path(long n, double a, double sigma_eps, Rng& rng,
                             bool stationary_start) {
    if (!(std::abs(a) < 1.0)) throw config_error("ar1_path: |a| must be below 1");
    if (!(sigma_eps > 0.0)) throw config_error("ar1_path: innovation sd must be positive");
    if (n <= 0) throw config_error("ar1_path: length must be positive");
    std::vector<double> z(n);
    double start_sd = stationary_start ? sigma_eps / std::sqrt(1.0 - a * a) : sigma_eps;
    z[0] = start_sd * rng.normal();
    for (long t = 1; t < n; ++t) z[t] = a * z[t - 1] + sigma_eps * rng.normal();
    return z;
}

Eigen::VectorXd normalize_zeta(const Eigen::VectorXd& theta0, const BasisSpec& basis,
                               const QuadGrid& grid) {
    if (theta0.size() != basis.p)
        throw dimension_error("normalize_zeta: theta0 length must equal basis dimension");
    Moments gram = moments_with_design(design_matrix(basis, grid), grid,
                                       Eigen::VectorXd::Zero(basis.p));
    double norm2 = theta0.dot(gram.Sigma * theta0);
    if (!(norm2 > 0.0)) throw config_error("normalize_zeta: theta0 must be nonzero");
    return theta0 / std::sqrt(norm2);
}

std::pair<Eigen::VectorXd, double> realize_log_intensity(const SimModel& model, long t,
                                                         double z_t) {
    double z = (model.scenario == Scenario::working) ? 0.0 : z_t;
    long j = seasonal_index(t, model.d());
    Eigen::VectorXd coeffs = model.theta0.row(j - 1).transpose() + z * model.zeta;
    double offset = model.eta0.dot(eval_trend(model.trend, static_cast<double>(t)));
    return {coeffs, offset};
}

PointPattern sample_pattern(const Eigen::VectorXd& coeffs, double offset,
                            const BasisSpec& basis, Rng& rng) {
    if (!coeffs.allFinite() || !std::isfinite(offset))
        throw config_error("sample_pattern: log intensity must be finite");
    const double mlog = spline_sup_bound(basis, coeffs) + offset;
    const double mean = std::exp(mlog) * (basis.hi - basis.lo);
    if (!(mean < 1e8)) throw config_error("sample_pattern: dominating intensity too large");
    long proposals = rng.poisson(mean);
    PointPattern pat;
    pat.points.reserve(proposals);
    for (long i = 0; i < proposals; ++i) {
        double u = basis.lo + (basis.hi - basis.lo) * rng.uniform();
        double log_ratio = coeffs.dot(eval_basis(basis, u)) + offset - mlog;
        if (log_ratio > 1e-12) throw error("sample_pattern: thinning bound violated");
        if (rng.uniform() < std::exp(log_ratio)) pat.points.push_back(u);
    }
    std::sort(pat.points.begin(), pat.points.end());
    return pat;
}

std::vector<double> latent_path(const SimModel& model, Rng& rep_rng) {
    Rng sub = rep_rng.stream(0);
    std::vector<double> z(model.n, 0.0);
    switch (model.scenario) {
        case Scenario::working:
            break;
        case Scenario::independent:
            for (auto& v : z) v = model.sigma * sub.normal();
            break;
        case Scenario::ar1:
            z = ar1_path(model.n, model.a, model.sigma_eps, sub, model.stationary_start);
            break;
    }
    return z;
}

std::vector<PointPattern> simulate_patterns(const SimModel& model, Rng rep_rng) {
    validate_model(model);
    std::vector<double> z = latent_path(model, rep_rng);
    std::vector<PointPattern> patterns(model.n);
    for (long t = 1; t <= model.n; ++t) {
        Rng day = rep_rng.stream(static_cast<std::uint64_t>(t));
        auto [coeffs, offset] = realize_log_intensity(model, t, z[t - 1]);
        patterns[t - 1] = sample_pattern(coeffs, offset, model.basis, day);
    }
    return patterns;
}

ErrorSummary run_study(const SimModel& model, int replications, const FitConfig& config,
                       int workers) {
    if (replications < 2) throw config_error("run_study: at least two replicates required");
    validate_model(model);
    if (model.theta0.rows() != 1)
        throw config_error("run_study: the study fits the trend-only model (one season)");

    const QuadGrid grid = default_grid(model.basis);
    const int q = model.trend.q;
    // the fit anchors the trend at the first day: residue-mode covariates
    // (t-1)^k with period n, matching the c(1) = 0 identification
    const TrendSpec fit_trend{TrendMode::residue, q, model.n, 0};
    const SeasonIndexer indexer(1, model.n);

    struct Record {
        bool ok = false;
        Eigen::VectorXd theta, eta;
    };
    std::vector<Record> recs(replications);
    const Rng master(model.seed);
    std::atomic<long> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    auto work = [&]() {
        for (;;) {
            long rep = next.fetch_add(1);
            if (rep >= replications || failed.load()) break;
            try {
                PatternSeries series;
                series.patterns =
                    simulate_patterns(model, master.stream(static_cast<std::uint64_t>(rep) + 1));
                series.indexer = indexer;
                series.trend = fit_trend;
                FitResult fr = fit(series, model.basis, grid, config);
                recs[rep] = {fr.converged, fr.params.theta.row(0).transpose(), fr.params.eta};
            } catch (...) {
                if (!failed.exchange(true)) failure = std::current_exception();
                break;
            }
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int i = 0; i < workers; ++i) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    if (failed.load()) std::rethrow_exception(failure);

    // targets: theta* = theta0 + tau0/2, eta0, lambda0 = exp(mu0 + v0/2) with
    // the true rank-one variance, c0~ on [0,1]
    const Eigen::MatrixXd design = design_matrix(model.basis, grid);
    const Eigen::VectorXd theta_star = model.theta0.row(0).transpose() + 0.5 * model.tau0;
    Eigen::VectorXd zv = design * model.zeta;
    double var_z = (model.scenario == Scenario::working) ? 0.0 : model.sigma * model.sigma;
    Eigen::VectorXd lam0 =
        ((design * model.theta0.row(0).transpose()).array() + 0.5 * var_z * zv.array().square())
            .exp()
            .matrix();
    const QuadGrid grid01 = make_grid(0.0, 1.0, 1, 10);
    Eigen::VectorXd c0(grid01.nodes.size());
    for (long i = 0; i < c0.size(); ++i) {
        double s = grid01.nodes[i];
        double acc = 0.0;
        for (int k = 1; k <= q; ++k) acc += model.eta0[k - 1] * std::pow(s, k);
        c0[i] = acc;
    }

    std::vector<Eigen::VectorXd> thetas, etas, lams, trends;
    for (const auto& rec : recs) {
        if (!rec.ok) continue;
        thetas.push_back(rec.theta);
        etas.push_back(anchored_to_normalized(rec.eta, model.n));
        lams.push_back(((design * rec.theta).array().exp()).matrix());
        Eigen::VectorXd ch = Eigen::VectorXd::Zero(grid01.nodes.size());
        for (long i = 0; i < ch.size(); ++i) {
            // fitted anchored polynomial sum_k eta_k (t-1)^k extrapolated to
            // t = (n+1)s for s covering all of [0,1]
            double x = (model.n + 1.0) * grid01.nodes[i] - 1.0;
            for (int k = q; k >= 1; --k) ch[i] = (ch[i] + rec.eta[k - 1]) * x;
        }
        trends.push_back(ch);
    }
    if (thetas.size() < 2) throw error("run_study: fewer than two converged replicates");

    ErrorSummary out;
    out.scenario = model.name;
    out.n = model.n;
    out.replications = replications;
    out.excluded = replications - static_cast<int>(thetas.size());
    out.theta = summarize(thetas, theta_star, nullptr);
    out.eta = summarize(etas, model.eta0, nullptr);
    out.intensity = summarize(lams, lam0, &grid.weights);
    out.trend = summarize(trends, c0, &grid01.weights);
    return out;
}

}  // namespace ppts
