#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "ppts/model.hpp"
#include "ppts/rng.hpp"

namespace ppts {

enum class Scenario { working, independent, ar1 };

// data-generating model: per-day log intensity
//   log lambda_t(u) = (theta0_j(t) + Z_t zeta) . beta(u) + eta0 . b(t)
// with Z_t = 0 (working), iid N(0, sigma^2) (independent) or an AR(1) path
struct SimModel {
    std::string name;  // "i", "ii", "iii" or a custom label
    BasisSpec basis;
    Eigen::MatrixXd theta0;  // d x p
    Eigen::VectorXd tau0;    // p; lambda_0j = exp(theta0_j . beta + tau0 . beta / 2)
    Eigen::VectorXd zeta;    // p; unit L2 norm direction of the perturbation
    TrendSpec trend;         // evaluated at t = 1..n for the true trend
    Eigen::VectorXd eta0;    // q
    Scenario scenario = Scenario::working;
    double sigma = 0.0;      // marginal sd of Z_t
    double a = 0.0;          // AR(1) coefficient
    double sigma_eps = 0.0;  // AR(1) innovation sd
    bool stationary_start = false;
    long n = 0;
    std::uint64_t seed = 0;

    int d() const { return static_cast<int>(theta0.rows()); }
    int p() const { return static_cast<int>(theta0.cols()); }
};

// the three study scenarios: one season on [0, 24], cubic spline with six
// coefficients, quadratic trend
SimModel preset_model(const std::string& scenario, long n, std::uint64_t seed);

// Z_1 = sigma_eps eps_1 (or the stationary draw), Z_t = a Z_{t-1} + sigma_eps eps_t
std::vector<double> ar1_path(long n, double a, double sigma_eps, Rng& rng,
                             bool stationary_start = false);

// theta0 scaled to a unit-L2-norm log intensity direction
Eigen::VectorXd normalize_zeta(const Eigen::VectorXd& theta0, const BasisSpec& basis,
                               const QuadGrid& grid);

// coefficients and trend offset of day t's realized log intensity
std::pair<Eigen::VectorXd, double> realize_log_intensity(const SimModel& model, long t,
                                                         double z_t);

// exact sampler: Poisson proposals under the constant dominating intensity
// exp(sup_bound + offset), thinned by the intensity ratio, returned sorted
PointPattern sample_pattern(const Eigen::VectorXd& coeffs, double offset,
                            const BasisSpec& basis, Rng& rng);

// latent path for one replicate (substream 0), then day t from substream t
std::vector<double> latent_path(const SimModel& model, Rng& rep_rng);
std::vector<PointPattern> simulate_patterns(const SimModel& model, Rng rep_rng);

struct ErrorRow {
    double bias = 0.0;
    double sd = 0.0;
    double rmse = 0.0;
};

struct ErrorSummary {
    std::string scenario;
    long n = 0;
    int replications = 0;
    int excluded = 0;  // non-converged replicates dropped from the summary
    ErrorRow theta, eta, intensity, trend;
};

// Monte Carlo study: simulate, fit with a residue-mode trend anchored at the
// first day (period n), and summarize errors against the working-model targets
ErrorSummary run_study(const SimModel& model, int replications,
                       const FitConfig& config = {}, int workers = 1);

}  // namespace ppts
