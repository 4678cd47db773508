#include "fedps/special_math.hpp"

#include <algorithm>
#include <cmath>

#include "fedps/errors.hpp"

namespace fedps {

double yeo_johnson(double lambda, double x) {
    if (x >= 0.0) {
        if (std::abs(lambda) < 1e-12) return std::log1p(x);
        return (std::pow(x + 1.0, lambda) - 1.0) / lambda;
    }
    if (std::abs(lambda - 2.0) < 1e-12) return -std::log1p(-x);
    return -(std::pow(-x + 1.0, 2.0 - lambda) - 1.0) / (2.0 - lambda);
}

double box_cox(double lambda, double x) {
    if (x <= 0.0) throw InvalidValue("Box-Cox requires strictly positive input");
    if (std::abs(lambda) < 1e-12) return std::log(x);
    return (std::pow(x, lambda) - 1.0) / lambda;
}

double norm_ppf(double p) {
    // Acklam's rational approximation.
    p = std::clamp(p, 1e-12, 1.0 - 1e-12);

    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;

    double x;
    if (p < p_low) {
        double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        double q = p - 0.5;
        double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    // one Halley refinement step
    const double sqrt2pi = 2.506628274631000502;
    double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    double u = e * sqrt2pi * std::exp(x * x / 2.0);
    x = x - u / (1.0 + x * u / 2.0);
    return x;
}

std::vector<double> clamped_knots(const std::vector<double>& base, int degree) {
    if (base.size() < 2) throw InvalidValue("need at least two base knots");
    std::vector<double> knots;
    knots.reserve(base.size() + 2 * static_cast<std::size_t>(degree));
    for (int i = 0; i < degree; ++i) knots.push_back(base.front());
    knots.insert(knots.end(), base.begin(), base.end());
    for (int i = 0; i < degree; ++i) knots.push_back(base.back());
    return knots;
}

std::vector<double> bspline_basis(const std::vector<double>& knots, int degree, double x) {
    const int n_basis = static_cast<int>(knots.size()) - degree - 1;
    if (n_basis < 1) throw InvalidValue("knot vector too short for degree");
    // clamp to the knot span so boundary values get full support
    x = std::clamp(x, knots[degree], knots[knots.size() - degree - 1]);

    // Cox-de Boor recursion; degree 0 activates exactly one span
    std::vector<double> basis(knots.size() - 1, 0.0);
    int span = -1;
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
        if (knots[i] <= x && x < knots[i + 1]) {
            span = static_cast<int>(i);
            break;
        }
    }
    if (span < 0) {
        // x sits on the right boundary: use the last non-empty interval
        for (std::size_t i = knots.size() - 1; i-- > 0;) {
            if (knots[i] < knots[i + 1]) {
                span = static_cast<int>(i);
                break;
            }
        }
    }
    if (span >= 0) basis[span] = 1.0;
    for (int d = 1; d <= degree; ++d) {
        for (std::size_t i = 0; i + d + 1 < knots.size(); ++i) {
            double left = 0.0, right = 0.0;
            double den1 = knots[i + d] - knots[i];
            double den2 = knots[i + d + 1] - knots[i + 1];
            if (den1 > 0.0) left = (x - knots[i]) / den1 * basis[i];
            if (den2 > 0.0) right = (knots[i + d + 1] - x) / den2 * basis[i + 1];
            basis[i] = left + right;
        }
    }
    basis.resize(n_basis);
    return basis;
}

}  // namespace fedps
