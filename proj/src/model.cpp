#include "ppts/model.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>

namespace ppts {

Eigen::VectorXd Params::pack() const {
    Eigen::VectorXd v(dim());
    long at = 0;
    for (int j = 0; j < d(); ++j, at += p()) v.segment(at, p()) = theta.row(j);
    v.tail(q()) = eta;
    return v;
}

Params Params::unpack(const Eigen::VectorXd& v, int d, int p, int q) {
    if (v.size() != static_cast<long>(d) * p + q)
        throw dimension_error("packed parameter length mismatch");
    Params out;
    out.theta.resize(d, p);
    long at = 0;
    for (int j = 0; j < d; ++j, at += p) out.theta.row(j) = v.segment(at, p);
    out.eta = v.tail(q);
    return out;
}

double log_poisson_density(const PointPattern& pattern,
                           const std::function<double(double)>& log_intensity,
                           double intensity_integral) {
    if (intensity_integral < 0.0) throw error("intensity integral must be nonnegative");
    double s = -intensity_integral - std::lgamma(pattern.count() + 1.0);
    for (double u : pattern.points) s += log_intensity(u);
    return s;
}

namespace {

struct Assembled {
    long n = 0;
    int d = 1, p = 1, q = 0;
    TrendSpec trend;
    std::vector<int> season;       // 0-based per day
    Eigen::VectorXd mcount;        // m_t
    Eigen::MatrixXd bt;            // n x q
    Eigen::MatrixXd Bsum;          // d x p, per-season sums of beta over events
    Eigen::MatrixXd Bday;          // n x p, per-day sums (only when per_day)
    Eigen::VectorXd events_per_season;  // d
};

Assembled assemble(const PatternSeries& series, const BasisSpec& basis, bool per_day) {
    Assembled a;
    a.n = series.n();
    if (a.n < 1) throw dimension_error("series must contain at least one day");
    a.d = series.indexer.d;
    a.p = basis.p;
    a.trend = series.trend;
    a.q = a.trend.q;
    if (a.trend.mode == TrendMode::normalized) {
        if (a.trend.n == 0) a.trend.n = a.n;
        else if (a.trend.n != a.n)
            throw config_error("normalized trend spec n differs from the series length");
    } else if (a.q > 0) {
        if (a.trend.r < 1) throw config_error("residue trend mode requires a period r");
        if (a.trend.r % a.d != 0)
            throw config_error("trend period r must be a multiple of the seasonal period d");
    }
    if (!series.season_labels.empty() &&
        series.season_labels.size() != static_cast<std::size_t>(a.n))
        throw dimension_error("season label vector length != series length");

    a.season.resize(a.n);
    a.mcount.resize(a.n);
    a.bt.resize(a.n, a.q);
    a.Bsum = Eigen::MatrixXd::Zero(a.d, a.p);
    if (per_day) a.Bday = Eigen::MatrixXd::Zero(a.n, a.p);
    a.events_per_season = Eigen::VectorXd::Zero(a.d);

    for (long t = 1; t <= a.n; ++t) {
        int j = series.season_of(t);
        if (j < 1 || j > a.d) throw index_error("season label out of range");
        a.season[t - 1] = j - 1;
        const PointPattern& pat = series.patterns[t - 1];
        a.mcount[t - 1] = static_cast<double>(pat.count());
        a.events_per_season[j - 1] += pat.count();
        if (a.q > 0) a.bt.row(t - 1) = eval_trend(a.trend, static_cast<double>(t));
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(a.p);
        for (double u : pat.points) acc += eval_basis(basis, u);
        a.Bsum.row(j - 1) += acc;
        if (per_day) a.Bday.row(t - 1) = acc;
    }
    return a;
}

void check_params(const Assembled& a, const Params& params) {
    if (params.d() != a.d || params.p() != a.p || params.q() != a.q)
        throw dimension_error("parameter dimensions do not match series and basis");
}

// objective, gradient and Hessian of the working log likelihood, computed in
// (possibly) scaled trend coordinates; ridge applies only to flagged seasons
struct Engine {
    const Assembled* a;
    Eigen::MatrixXd design;         // G x p
    const QuadGrid* grid;
    Eigen::MatrixXd bts;            // n x q, scaled covariates
    Eigen::VectorXd mb;             // sum_t m_t bts_t
    std::vector<char> ridged;
    double kappa = 0.0;

    Engine(const Assembled& asm_, const BasisSpec& basis, const QuadGrid& g,
           const Eigen::VectorXd& scale)
        : a(&asm_), design(design_matrix(basis, g)), grid(&g) {
        bts = a->bt;
        for (int k = 0; k < a->q; ++k) bts.col(k) /= scale[k];
        mb = bts.transpose() * a->mcount;
        ridged.assign(a->d, 0);
    }

    double eval(const Eigen::MatrixXd& theta, const Eigen::VectorXd& eta,
                Eigen::VectorXd* grad, Eigen::MatrixXd* hess, bool use_ridge) const {
        const long n = a->n;
        const int d = a->d, p = a->p, q = a->q;
        std::vector<Moments> mom(d);
        for (int j = 0; j < d; ++j)
            mom[j] = moments_with_design(design, *grid, theta.row(j).transpose());

        Eigen::VectorXd w(n);
        if (q > 0)
            w = (bts * eta).array().exp();
        else
            w.setOnes();

        Eigen::VectorXd Wj = Eigen::VectorXd::Zero(d);
        Eigen::MatrixXd cj = Eigen::MatrixXd::Zero(d, q);
        std::vector<Eigen::MatrixXd> Dj;
        if (hess) Dj.assign(d, Eigen::MatrixXd::Zero(q, q));
        for (long t = 0; t < n; ++t) {
            int j = a->season[t];
            Wj[j] += w[t];
            if (q > 0) {
                cj.row(j) += w[t] * bts.row(t);
                if (hess) Dj[j] += w[t] * bts.row(t).transpose() * bts.row(t);
            }
        }

        double obj = 0.0;
        for (int j = 0; j < d; ++j)
            obj += -Wj[j] * mom[j].e + theta.row(j).dot(a->Bsum.row(j));
        if (q > 0) obj += eta.dot(mb);
        obj /= n;
        if (use_ridge)
            for (int j = 0; j < d; ++j)
                if (ridged[j]) obj -= 0.5 * kappa * theta.row(j).squaredNorm();

        if (grad) {
            grad->resize(static_cast<long>(d) * p + q);
            for (int j = 0; j < d; ++j) {
                Eigen::VectorXd gj = (-Wj[j] * mom[j].sigma + a->Bsum.row(j).transpose()) / n;
                if (use_ridge && ridged[j]) gj -= kappa * theta.row(j).transpose();
                grad->segment(static_cast<long>(j) * p, p) = gj;
            }
            if (q > 0) {
                Eigen::VectorXd ge = mb;
                for (int j = 0; j < d; ++j) ge -= mom[j].e * cj.row(j).transpose();
                grad->tail(q) = ge / n;
            }
        }

        if (hess) {
            hess->setZero(static_cast<long>(d) * p + q, static_cast<long>(d) * p + q);
            for (int j = 0; j < d; ++j) {
                long off = static_cast<long>(j) * p;
                hess->block(off, off, p, p) = -(Wj[j] / n) * mom[j].Sigma;
                if (use_ridge && ridged[j])
                    hess->block(off, off, p, p) -= kappa * Eigen::MatrixXd::Identity(p, p);
                if (q > 0) {
                    Eigen::MatrixXd cross = -(mom[j].sigma * cj.row(j)) / n;
                    hess->block(off, d * static_cast<long>(p), p, q) = cross;
                    hess->block(d * static_cast<long>(p), off, q, p) = cross.transpose();
                }
            }
            if (q > 0) {
                Eigen::MatrixXd he = Eigen::MatrixXd::Zero(q, q);
                for (int j = 0; j < d; ++j) he -= mom[j].e * Dj[j];
                hess->block(d * static_cast<long>(p), d * static_cast<long>(p), q, q) = he / n;
            }
        }
        return obj;
    }
};

}  // namespace

double objective(const PatternSeries& series, const Params& params,
                 const QuadGrid& grid, const BasisSpec& basis) {
    Assembled a = assemble(series, basis, false);
    check_params(a, params);
    Engine eng(a, basis, grid, Eigen::VectorXd::Ones(a.q));
    return eng.eval(params.theta, params.eta, nullptr, nullptr, false);
}

Eigen::VectorXd score(const PatternSeries& series, const Params& params,
                      const QuadGrid& grid, const BasisSpec& basis) {
    Assembled a = assemble(series, basis, false);
    check_params(a, params);
    Engine eng(a, basis, grid, Eigen::VectorXd::Ones(a.q));
    Eigen::VectorXd g;
    eng.eval(params.theta, params.eta, &g, nullptr, false);
    return g;
}

Eigen::MatrixXd hessian(const PatternSeries& series, const Params& params,
                        const QuadGrid& grid, const BasisSpec& basis) {
    Assembled a = assemble(series, basis, false);
    check_params(a, params);
    Engine eng(a, basis, grid, Eigen::VectorXd::Ones(a.q));
    Eigen::MatrixXd h;
    eng.eval(params.theta, params.eta, nullptr, &h, false);
    return h;
}

Eigen::MatrixXd per_day_scores(const PatternSeries& series, const Params& params,
                               const QuadGrid& grid, const BasisSpec& basis) {
    Assembled a = assemble(series, basis, true);
    check_params(a, params);
    Eigen::MatrixXd design = design_matrix(basis, grid);
    std::vector<Moments> mom(a.d);
    for (int j = 0; j < a.d; ++j)
        mom[j] = moments_with_design(design, grid, params.theta.row(j).transpose());

    long dim = params.dim();
    Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(dim, a.n);
    for (long t = 0; t < a.n; ++t) {
        int j = a.season[t];
        double w = a.q > 0 ? std::exp(a.bt.row(t).dot(params.eta)) : 1.0;
        psi.block(static_cast<long>(j) * a.p, t, a.p, 1) =
            -w * mom[j].sigma + a.Bday.row(t).transpose();
        if (a.q > 0)
            psi.block(static_cast<long>(a.d) * a.p, t, a.q, 1) =
                (a.mcount[t] - w * mom[j].e) * a.bt.row(t).transpose();
    }
    return psi;
}

FitResult fit(const PatternSeries& series, const BasisSpec& basis,
              const QuadGrid& grid, const FitConfig& config) {
    if (!(config.tol > 0.0)) throw config_error("tolerance must be positive");
    Assembled a = assemble(series, basis, false);

    // large residue-mode covariates make the raw Hessian numerically
    // unusable, so Newton runs on covariates scaled into O(1) and eta is
    // mapped back at the end; covariates already <= 1 are left alone
    Eigen::VectorXd scale = Eigen::VectorXd::Ones(a.q);
    for (int k = 0; k < a.q; ++k)
        scale[k] = std::max(1.0, a.bt.col(k).cwiseAbs().maxCoeff());

    Engine eng(a, basis, grid, scale);
    eng.kappa = std::max(config.ridge, 0.0);
    bool any_ridged = false;
    std::vector<int> ridged_seasons;
    for (int j = 0; j < a.d; ++j)
        if (a.events_per_season[j] == 0.0) {
            eng.ridged[j] = 1;
            any_ridged = true;
            ridged_seasons.push_back(j + 1);
        }

    Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(a.d, a.p);
    Eigen::VectorXd eta = Eigen::VectorXd::Zero(a.q);
    if (config.init.size() > 0) {
        Params start = Params::unpack(config.init, a.d, a.p, a.q);
        theta = start.theta;
        eta = start.eta.cwiseProduct(scale);
    }

    FitResult res;
    Eigen::VectorXd g;
    Eigen::MatrixXd H;
    double obj = eng.eval(theta, eta, &g, &H, true);
    int iterations = 0;
    bool converged = false;
    std::vector<double> trace;

    for (;;) {
        double gnorm = g.lpNorm<Eigen::Infinity>();
        if (gnorm <= config.tol) {
            converged = true;
            break;
        }
        if (iterations >= config.max_iter) break;

        Eigen::VectorXd step = (-H).ldlt().solve(g);
        if (!step.allFinite()) break;

        double alpha = 1.0;
        bool accepted = false;
        Eigen::MatrixXd theta2;
        Eigen::VectorXd eta2, g2;
        Eigen::MatrixXd H2;
        double obj2 = 0.0;
        while (alpha >= 1e-16) {
            Params trial = Params::unpack(alpha * step, a.d, a.p, a.q);
            theta2 = theta + trial.theta;
            eta2 = eta + trial.eta;
            obj2 = eng.eval(theta2, eta2, &g2, &H2, true);
            if (std::isfinite(obj2) && obj2 > obj) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            // the Newton decrement is below the objective's floating point
            // resolution; the full step can still polish the gradient below
            // tolerance even though the objective cannot register it
            Params trial = Params::unpack(step, a.d, a.p, a.q);
            Eigen::VectorXd gp;
            double op = eng.eval(theta + trial.theta, eta + trial.eta, &gp, nullptr, true);
            if (std::isfinite(op) && gp.lpNorm<Eigen::Infinity>() <= config.tol) {
                theta += trial.theta;
                eta += trial.eta;
                obj = op;
                g = gp;
                converged = true;
                ++iterations;
            }
            break;
        }

        theta.swap(theta2);
        eta.swap(eta2);
        obj = obj2;
        g.swap(g2);
        H.swap(H2);
        ++iterations;
        trace.push_back(obj);
    }

    res.params.theta = theta;
    res.params.eta = eta.cwiseQuotient(scale);
    auto dec = decompose(res.params);
    res.mu = dec.first;
    res.seasonal = dec.second;
    res.objective_value =
        any_ridged ? eng.eval(theta, eta, nullptr, nullptr, false) : obj;
    res.gradient_norm = g.lpNorm<Eigen::Infinity>();
    res.iterations = iterations;
    res.converged = converged;
    res.ridged_seasons = std::move(ridged_seasons);
    res.objective_trace = std::move(trace);
    res.n = a.n;
    res.basis = basis;
    res.trend = a.trend;
    res.indexer = series.indexer;
    return res;
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> decompose(const Params& params) {
    Eigen::VectorXd mu = params.theta.colwise().mean();
    Eigen::MatrixXd seasonal = params.theta.rowwise() - mu.transpose();
    return {mu, seasonal};
}

Predict predict(const FitResult& fit, const BasisSpec& basis, const TrendSpec& trend) {
    Params params = fit.params;
    int d = params.d();
    Predict out;
    out.lambda = [params, basis, d](int j, double u) {
        if (j < 1 || j > d) throw index_error("season index out of range");
        return std::exp(params.theta.row(j - 1).dot(eval_basis(basis, u)));
    };
    Eigen::VectorXd eta = params.eta;
    out.trend = [eta, trend](double t) {
        if (eta.size() == 0) return 0.0;
        return eta.dot(eval_trend(trend, t));
    };
    return out;
}

Predict predict(const FitResult& fit) { return predict(fit, fit.basis, fit.trend); }

}  // namespace ppts
