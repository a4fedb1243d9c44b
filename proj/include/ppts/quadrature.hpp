#pragma once

#include <Eigen/Core>

#include "ppts/basis.hpp"

namespace ppts {

struct QuadGrid {
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;
    int panels = 0;
    int nodes_per_panel = 0;
};

// composite Gauss-Legendre grid on equal panels
QuadGrid make_grid(double lo, double hi, int panels, int nodes_per_panel);
// panels split at the given boundaries (ascending, covering [front, back])
QuadGrid make_grid_at(const std::vector<double>& boundaries, int nodes_per_panel);
// one panel per knot interval of the basis, so integrands built from the
// spline are smooth on every panel
QuadGrid default_grid(const BasisSpec& basis, int nodes_per_panel = 10);

double integrate(const Eigen::VectorXd& values, const QuadGrid& grid);

// design matrix: row i = beta(node_i)
Eigen::MatrixXd design_matrix(const BasisSpec& basis, const QuadGrid& grid);

// e = int exp(theta.beta), sigma = int exp(theta.beta) beta,
// Sigma = int exp(theta.beta) beta beta^T
struct Moments {
    double e = 0.0;
    Eigen::VectorXd sigma;
    Eigen::MatrixXd Sigma;
};

Moments moments(const BasisSpec& basis, const QuadGrid& grid, const Eigen::VectorXd& theta);
// same, reusing a precomputed design matrix
Moments moments_with_design(const Eigen::MatrixXd& design, const QuadGrid& grid,
                            const Eigen::VectorXd& theta);

}  // namespace ppts
