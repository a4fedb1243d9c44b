#pragma once

#include <Eigen/Core>
#include <functional>

#include "ppts/basis.hpp"
#include "ppts/model.hpp"
#include "ppts/quadrature.hpp"
#include "ppts/rng.hpp"

namespace oracle {

// textbook recursive Cox-de Boor evaluation, independent of the library's
// iterative implementation; the last nonempty knot interval is closed
double cox_de_boor(const std::vector<double>& knots, int i, int k, double u, double hi);
Eigen::VectorXd naive_basis(const ppts::BasisSpec& spec, double u);

// midpoint Riemann sum
double riemann(const std::function<double(double)>& f, double lo, double hi, long cells);

// central differences
Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& at, double h);
Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& at, double h);

// population limit of the working objective for a residue-mode truth
struct TrueModel {
    Eigen::MatrixXd theta0;  // d x p
    Eigen::VectorXd tau0;    // p
    Eigen::VectorXd eta0;    // q
    ppts::TrendSpec trend;   // residue mode with period r = w d
    ppts::BasisSpec basis;
    ppts::QuadGrid grid;

    int d() const { return static_cast<int>(theta0.rows()); }
    long r() const { return trend.r; }
};

double rho0(const ppts::Params& params, const TrueModel& model);
// the alternative reading of the limit display, kept to document that its
// gradient does not vanish at the stated maximizer
double rho0_displayed(const ppts::Params& params, const TrueModel& model);
// analytic gradient of rho0, packed like Params::pack
Eigen::VectorXd rho0_gradient(const ppts::Params& params, const TrueModel& model);

// exhaustive lattice argmax; resolution points per coordinate, at most 1e7 total
Eigen::VectorXd grid_maximize(const std::function<double(const Eigen::VectorXd&)>& f,
                              const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                              int resolution);

struct McEstimate {
    double mean = 0.0;
    double se = 0.0;
};

// Monte Carlo mean of sum_k g(u_k) over sampled patterns with the given
// log intensity; estimates int g(u) Lambda(u) du
McEstimate mc_campbell(const Eigen::VectorXd& coeffs, double offset,
                       const ppts::BasisSpec& basis,
                       const std::function<double(double)>& g, long samples, ppts::Rng rng);

}  // namespace oracle
