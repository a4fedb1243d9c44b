#include "ppts/covariance.hpp"

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <string>

#include "ppts/errors.hpp"

namespace ppts {

namespace {

TrendAverages zero_averages(int d, int q) {
    TrendAverages ta;
    ta.e1 = Eigen::VectorXd::Zero(d);
    ta.e2 = Eigen::VectorXd::Zero(d);
    ta.s1 = Eigen::MatrixXd::Zero(d, q);
    ta.s2 = Eigen::MatrixXd::Zero(d, q);
    ta.S1.assign(d, Eigen::MatrixXd::Zero(q, q));
    ta.S2.assign(d, Eigen::MatrixXd::Zero(q, q));
    return ta;
}

// name the block containing packed index i, for singularity messages
std::string block_name(long i, int d, int p, int q) {
    if (d <= 0) return "matrix";
    if (i < static_cast<long>(d) * p) return "season " + std::to_string(i / p + 1);
    if (q > 0) return "trend";
    return "matrix";
}

Eigen::MatrixXd sandwich_impl(const Eigen::MatrixXd& V, const Eigen::MatrixXd& W,
                              int d, int p, int q) {
    const long m = W.rows();
    if (W.cols() != m || V.rows() != m || V.cols() != m)
        throw dimension_error("sandwich: V and W must be square and equally sized");
    Eigen::MatrixXd neg_w = -0.5 * (W + W.transpose());
    // Jacobi equilibration: W and V carry the trend covariates' raw scale,
    // which can span many orders of magnitude; Omega = D (DWD)^-1 DVD (DWD)^-1 D
    // is exact, and rank checks on the scaled matrix measure actual coupling
    Eigen::VectorXd scale(m);
    for (long i = 0; i < m; ++i) {
        double wii = neg_w(i, i);
        if (!(wii > 0.0))
            throw singular_error("singular information matrix near " + block_name(i, d, p, q));
        scale[i] = 1.0 / std::sqrt(wii);
    }
    Eigen::MatrixXd ws = scale.asDiagonal() * neg_w * scale.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ws);
    const Eigen::VectorXd& ev = es.eigenvalues();
    double emax = ev.cwiseAbs().maxCoeff();
    long worst = 0;
    double emin = ev.minCoeff(&worst);
    if (!(emin > 0.0) || emin < 1e-12 * emax) {
        long idx = 0;
        es.eigenvectors().col(worst).cwiseAbs().maxCoeff(&idx);
        throw singular_error("singular information matrix near " + block_name(idx, d, p, q));
    }
    Eigen::MatrixXd winv =
        es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    Eigen::MatrixXd vs =
        scale.asDiagonal() * (0.5 * (V + V.transpose())) * scale.asDiagonal();
    Eigen::MatrixXd omega =
        scale.asDiagonal() * (winv * vs * winv) * scale.asDiagonal();
    return 0.5 * (omega + omega.transpose());
}

}  // namespace

TrendAverages trend_averages(const std::vector<int>& season0, const Eigen::MatrixXd& bt,
                             const Eigen::VectorXd& c, int d) {
    const long n = static_cast<long>(season0.size());
    if (bt.rows() != n || c.size() != n)
        throw dimension_error("trend_averages: inconsistent day counts");
    const int q = static_cast<int>(bt.cols());
    TrendAverages ta = zero_averages(d, q);
    const double scale = static_cast<double>(d) / static_cast<double>(n);
    for (long t = 0; t < n; ++t) {
        int j = season0[t];
        if (j < 0 || j >= d) throw index_error("trend_averages: season label out of range");
        double w1 = scale * std::exp(c[t]);
        double w2 = scale * std::exp(2.0 * c[t]);
        Eigen::VectorXd b = bt.row(t);
        ta.e1[j] += w1;
        ta.e2[j] += w2;
        ta.s1.row(j) += w1 * b.transpose();
        ta.s2.row(j) += w2 * b.transpose();
        ta.S1[j] += w1 * b * b.transpose();
        ta.S2[j] += w2 * b * b.transpose();
    }
    return ta;
}

TrendAverages cycle_trend_averages(const TrendSpec& trend, const Eigen::VectorXd& eta, int d) {
    if (trend.mode != TrendMode::residue)
        throw config_error("cycle_trend_averages: residue-mode trend required");
    if (trend.r <= 0 || trend.r % d != 0)
        throw config_error("cycle_trend_averages: period must be a positive multiple of d");
    if (eta.size() != trend.q)
        throw dimension_error("cycle_trend_averages: eta length must equal trend order");
    const long r = trend.r;
    std::vector<int> season0(r);
    Eigen::MatrixXd bt(r, trend.q);
    Eigen::VectorXd c(r);
    for (long t = 1; t <= r; ++t) {
        season0[t - 1] = static_cast<int>(seasonal_index(t, d)) - 1;
        Eigen::VectorXd b = eval_trend(trend, static_cast<double>(t));
        bt.row(t - 1) = b.transpose();
        c[t - 1] = eta.dot(b);
    }
    return trend_averages(season0, bt, c, d);
}

TrendAverages fitted_trend_averages(const PatternSeries& series, const Params& params) {
    const long n = series.n();
    if (n == 0) throw dimension_error("fitted_trend_averages: empty series");
    std::vector<int> season0(n);
    Eigen::MatrixXd bt(n, params.q());
    Eigen::VectorXd c(n);
    for (long t = 1; t <= n; ++t) {
        season0[t - 1] = series.season_of(t) - 1;
        Eigen::VectorXd b = eval_trend(series.trend, static_cast<double>(t));
        bt.row(t - 1) = b.transpose();
        c[t - 1] = params.eta.dot(b);
    }
    return trend_averages(season0, bt, c, params.d());
}

Eigen::MatrixXd plug_in_W(const FitResult& fit, const PatternSeries& series,
                          const BasisSpec& basis, const QuadGrid& grid) {
    if (!fit.converged) throw not_converged_error("plug_in_W: fit did not converge");
    const int d = fit.params.d(), p = fit.params.p(), q = fit.params.q();
    TrendAverages ta = fitted_trend_averages(series, fit.params);
    Eigen::MatrixXd design = design_matrix(basis, grid);
    const long dim = static_cast<long>(d) * p + q;
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(dim, dim);
    const double inv_d = 1.0 / d;
    for (int j = 0; j < d; ++j) {
        Moments mom = moments_with_design(design, grid, fit.params.theta.row(j));
        long off = static_cast<long>(j) * p;
        W.block(off, off, p, p) = -inv_d * ta.e1[j] * mom.Sigma;
        if (q > 0) {
            Eigen::MatrixXd cross = -inv_d * mom.sigma * ta.s1.row(j);
            W.block(off, d * p, p, q) = cross;
            W.block(d * p, off, q, p) = cross.transpose();
            W.block(d * p, d * p, q, q) -= inv_d * mom.e * ta.S1[j];
        }
    }
    return W;
}

Eigen::MatrixXd empirical_V(const PatternSeries& series, const FitResult& fit,
                            const BasisSpec& basis, const QuadGrid& grid) {
    if (!fit.converged) throw not_converged_error("empirical_V: fit did not converge");
    Eigen::MatrixXd psi = per_day_scores(series, fit.params, grid, basis);
    return psi * psi.transpose() / static_cast<double>(series.n());
}

Eigen::MatrixXd sandwich(const Eigen::MatrixXd& V, const Eigen::MatrixXd& W) {
    return sandwich_impl(V, W, 0, 1, 0);
}

Eigen::MatrixXd sandwich(const Eigen::MatrixXd& V, const Eigen::MatrixXd& W,
                         int d, int p, int q) {
    if (static_cast<long>(d) * p + q != W.rows())
        throw dimension_error("sandwich: block layout does not match matrix size");
    return sandwich_impl(V, W, d, p, q);
}

SandwichParts make_sandwich(const Eigen::MatrixXd& V, const Eigen::MatrixXd& W,
                            int d, int p, int q) {
    SandwichParts parts;
    parts.Omega = sandwich(V, W, d, p, q);
    parts.V = 0.5 * (V + V.transpose());
    parts.W = 0.5 * (W + W.transpose());
    parts.d = d;
    parts.p = p;
    parts.q = q;
    return parts;
}

TheoreticalVW theoretical_VW(const Eigen::MatrixXd& theta0, const Eigen::VectorXd& tau0,
                             const TrendAverages& ta, const BasisSpec& basis,
                             const QuadGrid& grid, const RankOneKernel* kernel) {
    const int d = static_cast<int>(theta0.rows());
    const int p = static_cast<int>(theta0.cols());
    const int q = static_cast<int>(ta.s1.cols());
    if (p != basis.p) throw dimension_error("theoretical_VW: theta0 columns must equal basis dimension");
    if (tau0.size() != p) throw dimension_error("theoreticalVW: tau0 length must equal basis dimension");
    if (ta.e1.size() != d) throw dimension_error("theoretical_VW: trend averages have wrong season count");

    Eigen::MatrixXd design = design_matrix(basis, grid);
    const long g = design.rows();
    Eigen::MatrixXd kmat;  // exp(gamma0(u_a, u_b)) on the tensor grid
    if (kernel != nullptr) {
        if (kernel->zeta_coeffs.size() != p)
            throw dimension_error("theoretical_VW: kernel coefficients must match basis dimension");
        Eigen::VectorXd zv = design * kernel->zeta_coeffs;
        kmat = (kernel->variance * zv * zv.transpose()).array().exp().matrix();
    } else {
        kmat = Eigen::MatrixXd::Ones(g, g);
    }

    const long dim = static_cast<long>(d) * p + q;
    Eigen::MatrixXd V = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(dim, dim);
    const double inv_d = 1.0 / d;
    for (int j = 0; j < d; ++j) {
        Eigen::VectorXd lam_coeffs = theta0.row(j).transpose() + 0.5 * tau0;
        Eigen::VectorXd wl = ((design * lam_coeffs).array().exp() * grid.weights.array()).matrix();
        double e_j = wl.sum();
        Eigen::VectorXd sig_j = design.transpose() * wl;
        Eigen::MatrixXd Sig_j = design.transpose() * wl.asDiagonal() * design;

        Eigen::MatrixXd f = (wl * wl.transpose()).cwiseProduct(kmat);
        double e_jj = f.sum();
        Eigen::VectorXd sig_jj = design.transpose() * f.rowwise().sum();
        Eigen::MatrixXd Sig_jj = design.transpose() * f * design;

        long off = static_cast<long>(j) * p;
        W.block(off, off, p, p) = -inv_d * ta.e1[j] * Sig_j;
        V.block(off, off, p, p) =
            inv_d * ta.e2[j] * (Sig_jj - sig_j * sig_j.transpose()) + inv_d * ta.e1[j] * Sig_j;
        if (q > 0) {
            Eigen::MatrixXd wcross = -inv_d * sig_j * ta.s1.row(j);
            W.block(off, d * p, p, q) = wcross;
            W.block(d * p, off, q, p) = wcross.transpose();
            W.block(d * p, d * p, q, q) -= inv_d * e_j * ta.S1[j];

            Eigen::MatrixXd vcross =
                inv_d * (sig_jj - e_j * sig_j) * ta.s2.row(j) + inv_d * sig_j * ta.s1.row(j);
            V.block(off, d * p, p, q) = vcross;
            V.block(d * p, off, q, p) = vcross.transpose();
            V.block(d * p, d * p, q, q) +=
                inv_d * ((e_jj - e_j * e_j) * ta.S2[j] + e_j * ta.S1[j]);
        }
    }
    return {V, W};
}

double z_quantile(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw config_error("alpha must lie in (0, 1)");
    boost::math::normal_distribution<double> nd;
    return boost::math::quantile(nd, 1.0 - alpha / 2.0);
}

std::pair<double, double> band_trend_block(double estimate, const Eigen::VectorXd& bt,
                                           const Eigen::MatrixXd& Omega_eta, long n,
                                           double alpha) {
    if (Omega_eta.rows() != bt.size() || Omega_eta.cols() != bt.size())
        throw dimension_error("band_trend: omega block does not match trend order");
    double var = bt.dot(Omega_eta * bt) / static_cast<double>(n);
    double half = z_quantile(alpha) * std::sqrt(std::max(var, 0.0));
    return {estimate - half, estimate + half};
}

std::pair<double, double> band_trend(const FitResult& fit, const Eigen::MatrixXd& Omega,
                                     double t, double alpha) {
    const int d = fit.params.d(), p = fit.params.p(), q = fit.params.q();
    if (Omega.rows() != static_cast<long>(d) * p + q)
        throw dimension_error("band_trend: omega does not match parameter layout");
    if (q == 0) throw config_error("band_trend: model has no trend component");
    Eigen::VectorXd bt = eval_trend(fit.trend, t);
    double estimate = fit.params.eta.dot(bt);
    return band_trend_block(estimate, bt, Omega.block(d * p, d * p, q, q), fit.n, alpha);
}

std::pair<double, double> band_intensity_block(double lambda, const Eigen::VectorXd& beta,
                                               const Eigen::MatrixXd& Omega_jj, long n,
                                               double alpha, bool delta_squared) {
    if (Omega_jj.rows() != beta.size() || Omega_jj.cols() != beta.size())
        throw dimension_error("band_intensity: omega block does not match basis dimension");
    double quad = beta.dot(Omega_jj * beta) / static_cast<double>(n);
    double factor = delta_squared ? lambda * lambda : lambda;
    double half = z_quantile(alpha) * std::sqrt(std::max(factor * quad, 0.0));
    return {lambda - half, lambda + half};
}

std::pair<double, double> band_intensity(const FitResult& fit, const Eigen::MatrixXd& Omega,
                                         int j, double u, double alpha, bool delta_squared) {
    const int d = fit.params.d(), p = fit.params.p(), q = fit.params.q();
    if (Omega.rows() != static_cast<long>(d) * p + q)
        throw dimension_error("band_intensity: omega does not match parameter layout");
    if (j < 1 || j > d) throw index_error("band_intensity: season index out of range");
    Eigen::VectorXd beta = eval_basis(fit.basis, u);
    double lambda = std::exp(fit.params.theta.row(j - 1).dot(beta));
    long off = static_cast<long>(j - 1) * p;
    return band_intensity_block(lambda, beta, Omega.block(off, off, p, p), fit.n, alpha,
                                delta_squared);
}

}  // namespace ppts
