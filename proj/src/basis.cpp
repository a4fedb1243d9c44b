#include "ppts/basis.hpp"

#include <algorithm>
#include <cmath>

namespace ppts {

static BasisSpec finish_basis(double lo, double hi, int degree,
                              const std::vector<double>& interior) {
    BasisSpec spec;
    spec.lo = lo;
    spec.hi = hi;
    spec.degree = degree;
    spec.p = degree + 1 + static_cast<int>(interior.size());
    spec.knots.reserve(spec.p + degree + 1);
    for (int i = 0; i <= degree; ++i) spec.knots.push_back(lo);
    for (double k : interior) spec.knots.push_back(k);
    for (int i = 0; i <= degree; ++i) spec.knots.push_back(hi);
    return spec;
}

BasisSpec make_bspline_basis(double lo, double hi, int degree, int interior_knots) {
    if (!(lo < hi)) throw invalid_domain_error("basis domain is empty or inverted");
    if (degree < 0) throw config_error("spline degree must be nonnegative");
    if (interior_knots < 0) throw config_error("interior knot count must be nonnegative");
    std::vector<double> interior(interior_knots);
    for (int i = 0; i < interior_knots; ++i)
        interior[i] = lo + (hi - lo) * (i + 1) / (interior_knots + 1);
    return finish_basis(lo, hi, degree, interior);
}

BasisSpec make_bspline_basis(double lo, double hi, int degree,
                             const std::vector<double>& interior) {
    if (!(lo < hi)) throw invalid_domain_error("basis domain is empty or inverted");
    if (degree < 0) throw config_error("spline degree must be nonnegative");
    for (std::size_t i = 0; i < interior.size(); ++i) {
        if (!(interior[i] > lo && interior[i] < hi))
            throw config_error("interior knots must lie strictly inside the domain");
        if (i > 0 && interior[i] < interior[i - 1])
            throw config_error("interior knots must be nondecreasing");
    }
    return finish_basis(lo, hi, degree, interior);
}

Eigen::VectorXd eval_basis(const BasisSpec& spec, double u) {
    if (!(u >= spec.lo && u <= spec.hi))
        throw out_of_domain_error("point outside the basis domain");
    const int deg = spec.degree;
    const int p = spec.p;
    const std::vector<double>& T = spec.knots;

    // span index i with T[i] <= u < T[i+1]; the last span is closed at hi
    int span = deg;
    while (span < p - 1 && u >= T[span + 1]) ++span;

    std::vector<double> N(deg + 1), left(deg + 1), right(deg + 1);
    N[0] = 1.0;
    for (int j = 1; j <= deg; ++j) {
        left[j] = u - T[span + 1 - j];
        right[j] = T[span + j] - u;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            double tmp = N[r] / (right[r + 1] + left[j - r]);
            N[r] = saved + right[r + 1] * tmp;
            saved = left[j - r] * tmp;
        }
        N[j] = saved;
    }
    Eigen::VectorXd out = Eigen::VectorXd::Zero(p);
    for (int k = 0; k <= deg; ++k) out[span - deg + k] = N[k];
    return out;
}

double spline_sup_bound(const BasisSpec& spec, const Eigen::VectorXd& coeffs) {
    if (coeffs.size() != spec.p) throw dimension_error("coefficient length != basis dimension");
    return coeffs.maxCoeff();
}

Eigen::VectorXd eval_trend(const TrendSpec& spec, double t) {
    if (t < 1.0) throw index_error("time index must be >= 1");
    if (spec.q < 0) throw config_error("trend dimension must be nonnegative");
    Eigen::VectorXd b(spec.q);
    double x;
    if (spec.mode == TrendMode::residue) {
        if (spec.r < 1) throw config_error("residue trend mode requires a period r >= 1");
        double s = std::fmod(t - 1.0, static_cast<double>(spec.r)) + 1.0;
        x = s - 1.0;
    } else {
        if (spec.n < 1) throw config_error("normalized trend mode requires the series length n");
        x = t / (spec.n + 1.0);
    }
    double pw = 1.0;
    for (int k = 0; k < spec.q; ++k) {
        pw *= x;
        b[k] = pw;
    }
    return b;
}

long seasonal_index(long t, int d) {
    if (t < 1) throw index_error("time index must be >= 1");
    if (d < 1) throw config_error("seasonal period must be >= 1");
    return (t - 1) % d + 1;
}

long trend_residue(long t, long r) {
    if (t < 1) throw index_error("time index must be >= 1");
    if (r < 1) throw config_error("trend period must be >= 1");
    return (t - 1) % r + 1;
}

SeasonIndexer::SeasonIndexer(int d_, long r_) : d(d_), r(r_) {
    if (d < 1) throw config_error("seasonal period must be >= 1");
    if (r != 0 && r % d != 0) throw config_error("trend period r must be a multiple of d");
}

}  // namespace ppts
