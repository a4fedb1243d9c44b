#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "oracle.hpp"
#include "ppts/errors.hpp"
#include "ppts/quadrature.hpp"
#include "ppts/rng.hpp"

using namespace ppts;

static Eigen::VectorXd theta_star_ref() {
    Eigen::VectorXd t(6);
    t << -5.196, -4.7945, -0.1865, -4.005, -1.178, -5.2905;
    return t;
}

TEST_CASE("grid construction and basic weights") {
    QuadGrid g = make_grid(0.0, 24.0, 3, 10);
    CHECK(g.nodes.size() == 30);
    CHECK(std::abs(g.weights.sum() - 24.0) < 1e-10);
    CHECK(g.weights.minCoeff() > 0.0);
    for (long i = 1; i < g.nodes.size(); ++i) CHECK(g.nodes[i] > g.nodes[i - 1]);
    CHECK(g.nodes.minCoeff() > 0.0);
    CHECK(g.nodes.maxCoeff() < 24.0);

    CHECK(std::abs(integrate(Eigen::VectorXd::Ones(30), g) - 24.0) < 1e-12);

    CHECK_THROWS_AS(make_grid(0.0, 24.0, 0, 10), config_error);
    CHECK_THROWS_AS(make_grid(0.0, 24.0, 3, 1), config_error);
    CHECK_THROWS_AS(make_grid(0.0, 24.0, 3, 21), config_error);
    CHECK_THROWS_AS(make_grid(5.0, 5.0, 1, 10), invalid_domain_error);
}

TEST_CASE("gauss exactness on polynomials") {
    QuadGrid g = make_grid(0.0, 1.0, 1, 2);
    Eigen::VectorXd vals = g.nodes.array().square();
    CHECK(integrate(vals, g) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    // 2k-1 rule: degree 19 polynomial integrated exactly by 10 nodes
    QuadGrid g10 = make_grid(0.0, 1.0, 1, 10);
    Eigen::VectorXd v19 = g10.nodes.array().pow(19);
    CHECK(integrate(v19, g10) == doctest::Approx(1.0 / 20.0).epsilon(1e-13));
}

TEST_CASE("integrate checks lengths and is linear") {
    QuadGrid g = make_grid(0.0, 2.0, 2, 5);
    CHECK_THROWS_AS(integrate(Eigen::VectorXd::Ones(9), g), dimension_error);

    Rng rng(3);
    Eigen::VectorXd f(g.nodes.size()), h(g.nodes.size());
    for (long i = 0; i < f.size(); ++i) {
        f[i] = rng.normal();
        h[i] = rng.normal();
    }
    double lhs = integrate(2.5 * f - 1.25 * h, g);
    CHECK(lhs == doctest::Approx(2.5 * integrate(f, g) - 1.25 * integrate(h, g)).epsilon(1e-13));
}

TEST_CASE("grid refinement agreement on a smooth function") {
    auto f = [](double u) { return std::exp(std::sin(u) + 0.3 * u); };
    QuadGrid a = make_grid(0.0, 6.0, 12, 10);
    QuadGrid b = make_grid(0.0, 6.0, 48, 12);
    Eigen::VectorXd fa(a.nodes.size()), fb(b.nodes.size());
    for (long i = 0; i < fa.size(); ++i) fa[i] = f(a.nodes[i]);
    for (long i = 0; i < fb.size(); ++i) fb[i] = f(b.nodes[i]);
    double va = integrate(fa, a), vb = integrate(fb, b);
    CHECK(std::abs(va - vb) < 1e-9 * std::abs(vb));
}

TEST_CASE("make_grid_at places panels at the given boundaries") {
    QuadGrid g = make_grid_at({0.0, 8.0, 16.0, 24.0}, 10);
    CHECK(g.panels == 3);
    CHECK(std::abs(g.weights.sum() - 24.0) < 1e-10);
    CHECK_THROWS_AS(make_grid_at({0.0, 8.0, 4.0}, 10), config_error);
    CHECK_THROWS_AS(make_grid_at({0.0}, 10), config_error);
}

TEST_CASE("default grid splits at the knots") {
    BasisSpec basis = make_bspline_basis(0.0, 24.0, 3, 2);
    QuadGrid g = default_grid(basis);
    CHECK(g.panels == 3);
    CHECK(g.nodes_per_panel == 10);
    CHECK(std::abs(g.weights.sum() - 24.0) < 1e-10);
}

TEST_CASE("moments at theta = 0 reduce to basis integrals") {
    BasisSpec basis = make_bspline_basis(0.0, 24.0, 3, 2);
    QuadGrid g = default_grid(basis);
    Moments m = moments(basis, g, Eigen::VectorXd::Zero(6));
    CHECK(m.e == doctest::Approx(24.0).epsilon(1e-14));
    CHECK(m.sigma.sum() == doctest::Approx(24.0).epsilon(1e-14));
    CHECK((m.Sigma - m.Sigma.transpose()).cwiseAbs().maxCoeff() < 1e-14);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.Sigma);
    CHECK(es.eigenvalues().minCoeff() > -1e-12);
    // row sums of the Gram matrix reproduce sigma by partition of unity
    CHECK((m.Sigma.rowwise().sum() - m.sigma).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(moments(basis, g, Eigen::VectorXd::Zero(5)), dimension_error);
}

TEST_CASE("sigma is the gradient of e") {
    BasisSpec basis = make_bspline_basis(0.0, 24.0, 3, 2);
    QuadGrid g = default_grid(basis);
    Rng rng(21);
    for (int trial = 0; trial < 5; ++trial) {
        Eigen::VectorXd theta(6);
        for (int k = 0; k < 6; ++k) theta[k] = 2.0 * (rng.uniform() - 0.5);
        Moments m = moments(basis, g, theta);
        Eigen::VectorXd fd = oracle::fd_gradient(
            [&](const Eigen::VectorXd& th) { return moments(basis, g, th).e; }, theta, 1e-5);
        CHECK((fd - m.sigma).norm() < 1e-6 * m.sigma.norm());
        // Sigma is likewise the Jacobian of sigma
        Eigen::MatrixXd jac = oracle::fd_jacobian(
            [&](const Eigen::VectorXd& th) {
                return Eigen::VectorXd(moments(basis, g, th).sigma);
            },
            theta, 1e-5);
        CHECK((jac - m.Sigma).norm() < 1e-6 * m.Sigma.norm());
    }
}

TEST_CASE("moment integrals match a brute-force Riemann sum") {
    BasisSpec basis = make_bspline_basis(0.0, 24.0, 3, 2);
    QuadGrid g = default_grid(basis);
    Eigen::VectorXd theta0(6);
    theta0 << -5.45, -4.96, -0.13, -4.14, -1.15, -5.52;

    double quad = moments(basis, g, theta0).e;
    double ref = oracle::riemann(
        [&](double u) { return std::exp(theta0.dot(eval_basis(basis, u))); }, 0.0, 24.0,
        1000000);
    CHECK(std::abs(quad - ref) < 1e-8 * std::abs(ref));

    // lambda_0 = exp(mu_0 + v_0/2): expected day-one count level
    double e_star = moments(basis, g, theta_star_ref()).e;
    double ref_star = oracle::riemann(
        [&](double u) { return std::exp(theta_star_ref().dot(eval_basis(basis, u))); }, 0.0,
        24.0, 1000000);
    CHECK(std::abs(e_star - ref_star) < 1e-6 * std::abs(ref_star));
}

TEST_CASE("tilted second moment is a covariance") {
    BasisSpec basis = make_bspline_basis(0.0, 24.0, 3, 2);
    QuadGrid g = default_grid(basis);
    Rng rng(9);
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::VectorXd theta(6);
        for (int k = 0; k < 6; ++k) theta[k] = 4.0 * (rng.uniform() - 0.5);
        Moments m = moments(basis, g, theta);
        Eigen::MatrixXd cov = m.Sigma - m.sigma * m.sigma.transpose() / m.e;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
        CHECK(es.eigenvalues().minCoeff() > -1e-10);
    }
}

TEST_CASE("doubling the panels leaves converged moments unchanged") {
    BasisSpec basis = make_bspline_basis(0.0, 24.0, 3, 2);
    Rng rng(33);
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::VectorXd theta(6);
        for (int k = 0; k < 6; ++k) theta[k] = 20.0 * (rng.uniform() - 0.5);  // |theta_i| <= 10
        double e1 = moments(basis, make_grid(0.0, 24.0, 30, 10), theta).e;
        double e2 = moments(basis, make_grid(0.0, 24.0, 60, 10), theta).e;
        CHECK(std::abs(e1 - e2) < 1e-8 * std::abs(e2));
    }
}
