#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "ppts/basis.hpp"
#include "ppts/quadrature.hpp"

namespace ppts {

struct PointPattern {
    std::vector<double> points;  // event locations in [lo, hi], kept sorted by producers
    long count() const { return static_cast<long>(points.size()); }
};

struct PatternSeries {
    std::vector<PointPattern> patterns;  // day t = 1..n
    SeasonIndexer indexer;
    TrendSpec trend;
    // optional explicit season labels (1..d per day); empty = residue rule
    std::vector<int> season_labels;

    long n() const { return static_cast<long>(patterns.size()); }
    int season_of(long t) const {
        if (!season_labels.empty()) return season_labels[t - 1];
        return static_cast<int>(indexer.season_of(t));
    }
};

struct Params {
    Eigen::MatrixXd theta;  // d rows of length p
    Eigen::VectorXd eta;    // length q

    int d() const { return static_cast<int>(theta.rows()); }
    int p() const { return static_cast<int>(theta.cols()); }
    int q() const { return static_cast<int>(eta.size()); }
    long dim() const { return theta.size() + eta.size(); }

    Eigen::VectorXd pack() const;
    static Params unpack(const Eigen::VectorXd& v, int d, int p, int q);
};

struct FitConfig {
    double tol = 1e-8;
    int max_iter = 100;
    double ridge = 1e-6;    // applied only to seasons with zero events
    Eigen::VectorXd init;   // optional packed start, default all zeros
};

struct FitResult {
    Params params;
    Eigen::VectorXd mu;        // mean of the theta rows
    Eigen::MatrixXd seasonal;  // s_j = theta_j - mu; rows sum to zero
    double objective_value = 0.0;
    double gradient_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<int> ridged_seasons;      // 1-based seasons that had no events
    std::vector<double> objective_trace;  // objective after each accepted step
    long n = 0;
    BasisSpec basis;
    TrendSpec trend;
    SeasonIndexer indexer;
};

// log density of an inhomogeneous Poisson pattern:
// -integral - log(m!) + sum_k log_intensity(u_k)
double log_poisson_density(const PointPattern& pattern,
                           const std::function<double(double)>& log_intensity,
                           double intensity_integral);

double objective(const PatternSeries& series, const Params& params,
                 const QuadGrid& grid, const BasisSpec& basis);
Eigen::VectorXd score(const PatternSeries& series, const Params& params,
                      const QuadGrid& grid, const BasisSpec& basis);
Eigen::MatrixXd hessian(const PatternSeries& series, const Params& params,
                        const QuadGrid& grid, const BasisSpec& basis);

// per-day score contributions psi_t as columns; score equals the column mean
Eigen::MatrixXd per_day_scores(const PatternSeries& series, const Params& params,
                               const QuadGrid& grid, const BasisSpec& basis);

// Newton ascent with step halving from the (zero by default) start
FitResult fit(const PatternSeries& series, const BasisSpec& basis,
              const QuadGrid& grid, const FitConfig& config = {});

// mu = mean of theta rows, seasonal rows sum to zero
std::pair<Eigen::VectorXd, Eigen::MatrixXd> decompose(const Params& params);

struct Predict {
    std::function<double(int, double)> lambda;  // season j (1-based), point u
    std::function<double(double)> trend;        // day t; fractional t allowed
};
Predict predict(const FitResult& fit, const BasisSpec& basis, const TrendSpec& trend);
Predict predict(const FitResult& fit);

}  // namespace ppts
