#pragma once

#include <Eigen/Core>
#include <utility>
#include <vector>

#include "ppts/model.hpp"

namespace ppts {

struct SandwichParts {
    Eigen::MatrixXd V;
    Eigen::MatrixXd W;
    Eigen::MatrixXd Omega;
    int d = 1, p = 1, q = 0;  // block j occupies [(j-1)p, jp); eta block starts at dp
};

// per-season averages of the exponentiated trend against the trend basis:
// e1_j = (d/n) sum_{t: j(t)=j} exp(c_t)            e2_j uses exp(2 c_t)
// s1_j = (d/n) sum exp(c_t) b_t                    s2_j uses exp(2 c_t)
// S1_j = (d/n) sum exp(c_t) b_t b_t^T              S2_j uses exp(2 c_t)
// For a residue-mode trend observed over complete cycles these are exactly
// the cycle averages over i = 1..w at days a_ij.
struct TrendAverages {
    Eigen::VectorXd e1, e2;               // d
    Eigen::MatrixXd s1, s2;               // d x q
    std::vector<Eigen::MatrixXd> S1, S2;  // d blocks of q x q
};

TrendAverages trend_averages(const std::vector<int>& season0,  // 0-based labels
                             const Eigen::MatrixXd& bt, const Eigen::VectorXd& c, int d);
// averages over one complete cycle t = 1..r of a residue-mode trend
TrendAverages cycle_trend_averages(const TrendSpec& trend, const Eigen::VectorXd& eta, int d);
// averages over the actual sample design at the fitted trend
TrendAverages fitted_trend_averages(const PatternSeries& series, const Params& params);

// plug-in W with fitted intensities and trend substituted
Eigen::MatrixXd plug_in_W(const FitResult& fit, const PatternSeries& series,
                          const BasisSpec& basis, const QuadGrid& grid);

// V-hat = (1/n) sum_t psi_t psi_t^T at the fitted parameters
Eigen::MatrixXd empirical_V(const PatternSeries& series, const FitResult& fit,
                            const BasisSpec& basis, const QuadGrid& grid);

Eigen::MatrixXd sandwich(const Eigen::MatrixXd& V, const Eigen::MatrixXd& W);
Eigen::MatrixXd sandwich(const Eigen::MatrixXd& V, const Eigen::MatrixXd& W,
                         int d, int p, int q);

// symmetrized V and W bundled with Omega and the block layout
SandwichParts make_sandwich(const Eigen::MatrixXd& V, const Eigen::MatrixXd& W,
                            int d, int p, int q);

// gamma0(u, u') = variance * zeta(u) zeta(u'), zeta a unit-norm spline
struct RankOneKernel {
    Eigen::VectorXd zeta_coeffs;
    double variance = 0.0;
};

// exact asymptotic V and W for true parameters theta0 (d x p rows), variance
// correction tau0 (lambda_0j = exp(theta0_j.beta + tau0.beta / 2)), the given
// trend averages, and an optional rank-one kernel (null = zero kernel)
struct TheoreticalVW {
    Eigen::MatrixXd V;
    Eigen::MatrixXd W;
};
TheoreticalVW theoretical_VW(const Eigen::MatrixXd& theta0, const Eigen::VectorXd& tau0,
                             const TrendAverages& ta, const BasisSpec& basis,
                             const QuadGrid& grid, const RankOneKernel* kernel = nullptr);

// two-sided standard normal quantile for level alpha
double z_quantile(double alpha);

// c-hat(t) +/- z sqrt(b(t)^T Omega_eta b(t) / n)
std::pair<double, double> band_trend(const FitResult& fit, const Eigen::MatrixXd& Omega,
                                     double t, double alpha);
std::pair<double, double> band_trend_block(double estimate, const Eigen::VectorXd& bt,
                                           const Eigen::MatrixXd& Omega_eta, long n,
                                           double alpha);

// delta-method band for lambda_j(u); variance factor lambda^2 by default,
// lambda^1 with delta_squared = false (compatibility variant)
std::pair<double, double> band_intensity(const FitResult& fit, const Eigen::MatrixXd& Omega,
                                         int j, double u, double alpha,
                                         bool delta_squared = true);
std::pair<double, double> band_intensity_block(double lambda, const Eigen::VectorXd& beta,
                                               const Eigen::MatrixXd& Omega_jj, long n,
                                               double alpha, bool delta_squared = true);

}  // namespace ppts
