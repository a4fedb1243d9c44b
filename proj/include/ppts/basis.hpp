#pragma once

#include <Eigen/Core>
#include <vector>

#include "ppts/errors.hpp"

namespace ppts {

// clamped B-spline basis on [lo, hi]
struct BasisSpec {
    double lo = 0.0;
    double hi = 1.0;
    int degree = 0;
    std::vector<double> knots;  // full clamped sequence, length p + degree + 1
    int p = 1;                  // basis dimension = degree + 1 + interior knots
};

BasisSpec make_bspline_basis(double lo, double hi, int degree, int interior_knots);
// explicit interior knot positions (must lie strictly inside the domain)
BasisSpec make_bspline_basis(double lo, double hi, int degree,
                             const std::vector<double>& interior);

// de Boor values at u; nonnegative, sum to one
Eigen::VectorXd eval_basis(const BasisSpec& spec, double u);

// convex-hull bound: sup_u coeffs . beta(u) <= max coefficient
double spline_sup_bound(const BasisSpec& spec, const Eigen::VectorXd& coeffs);

enum class TrendMode { residue, normalized };

// monomial trend basis b(t); q = 0 means no trend covariates
struct TrendSpec {
    TrendMode mode = TrendMode::normalized;
    int q = 0;
    long r = 0;  // residue mode period
    long n = 0;  // normalized mode series length
};

// residue mode: b(t) = ((s-1), ..., (s-1)^q), s = {t}_r, so b(1) = 0
// normalized mode: b(t) = (s, ..., s^q), s = t / (n+1)
// t may be fractional (used when evaluating fitted trends between days)
Eigen::VectorXd eval_trend(const TrendSpec& spec, double t);

long seasonal_index(long t, int d);
long trend_residue(long t, long r);

struct SeasonIndexer {
    int d = 1;
    long r = 0;  // 0 = unset; otherwise must be a multiple of d
    SeasonIndexer() = default;
    SeasonIndexer(int d_, long r_ = 0);
    long season_of(long t) const { return seasonal_index(t, d); }
};

// day index of cycle slot (i, j): a_ij = (i-1) d + j
inline long cycle_day(long i, long j, int d) { return (i - 1) * d + j; }

}  // namespace ppts
