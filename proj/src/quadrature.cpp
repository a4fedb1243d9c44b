#include "ppts/quadrature.hpp"

#include <cmath>

namespace ppts {

// Gauss-Legendre nodes and weights on (-1, 1) by Newton iteration on P_n
static void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    const double pi = 3.14159265358979323846;
    for (int k = 0; k < (n + 1) / 2; ++k) {
        double t = std::cos(pi * (k + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = t;
            for (int j = 2; j <= n; ++j) {
                double p2 = ((2.0 * j - 1.0) * t * p1 - (j - 1.0) * p0) / j;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (t * p1 - p0) / (t * t - 1.0);
            double step = p1 / dp;
            t -= step;
            if (std::abs(step) < 1e-15) break;
        }
        x[n - 1 - k] = t;
        x[k] = -t;
        double ww = 2.0 / ((1.0 - t * t) * dp * dp);
        w[k] = ww;
        w[n - 1 - k] = ww;
    }
}

QuadGrid make_grid_at(const std::vector<double>& boundaries, int nodes_per_panel) {
    if (boundaries.size() < 2) throw config_error("need at least one panel");
    if (nodes_per_panel < 2 || nodes_per_panel > 20)
        throw config_error("nodes per panel must be in [2, 20]");
    for (std::size_t i = 1; i < boundaries.size(); ++i)
        if (!(boundaries[i] > boundaries[i - 1]))
            throw config_error("panel boundaries must be strictly increasing");

    std::vector<double> gx, gw;
    gauss_legendre(nodes_per_panel, gx, gw);

    int panels = static_cast<int>(boundaries.size()) - 1;
    QuadGrid grid;
    grid.panels = panels;
    grid.nodes_per_panel = nodes_per_panel;
    grid.nodes.resize(static_cast<long>(panels) * nodes_per_panel);
    grid.weights.resize(grid.nodes.size());
    long at = 0;
    for (int pnl = 0; pnl < panels; ++pnl) {
        double a = boundaries[pnl], b = boundaries[pnl + 1];
        double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        for (int i = 0; i < nodes_per_panel; ++i, ++at) {
            grid.nodes[at] = mid + half * gx[i];
            grid.weights[at] = half * gw[i];
        }
    }
    return grid;
}

QuadGrid make_grid(double lo, double hi, int panels, int nodes_per_panel) {
    if (!(lo < hi)) throw invalid_domain_error("quadrature domain is empty or inverted");
    if (panels < 1) throw config_error("panel count must be >= 1");
    std::vector<double> bounds(panels + 1);
    for (int i = 0; i <= panels; ++i) bounds[i] = lo + (hi - lo) * i / panels;
    return make_grid_at(bounds, nodes_per_panel);
}

QuadGrid default_grid(const BasisSpec& basis, int nodes_per_panel) {
    std::vector<double> bounds;
    bounds.push_back(basis.lo);
    for (double k : basis.knots)
        if (k > bounds.back() && k < basis.hi) bounds.push_back(k);
    bounds.push_back(basis.hi);
    return make_grid_at(bounds, nodes_per_panel);
}

double integrate(const Eigen::VectorXd& values, const QuadGrid& grid) {
    if (values.size() != grid.nodes.size())
        throw dimension_error("value vector length != node count");
    return grid.weights.dot(values);
}

Eigen::MatrixXd design_matrix(const BasisSpec& basis, const QuadGrid& grid) {
    Eigen::MatrixXd design(grid.nodes.size(), basis.p);
    for (long i = 0; i < grid.nodes.size(); ++i)
        design.row(i) = eval_basis(basis, grid.nodes[i]).transpose();
    return design;
}

Moments moments_with_design(const Eigen::MatrixXd& design, const QuadGrid& grid,
                            const Eigen::VectorXd& theta) {
    if (theta.size() != design.cols()) throw dimension_error("theta length != basis dimension");
    Eigen::VectorXd wx = (design * theta).array().exp() * grid.weights.array();
    Moments m;
    m.e = wx.sum();
    m.sigma = design.transpose() * wx;
    m.Sigma = design.transpose() * wx.asDiagonal() * design;
    return m;
}

Moments moments(const BasisSpec& basis, const QuadGrid& grid, const Eigen::VectorXd& theta) {
    return moments_with_design(design_matrix(basis, grid), grid, theta);
}

}  // namespace ppts
