#pragma once

#include <vector>

namespace fedps {

/// Yeo-Johnson power transform psi(lambda, x); psi(1, x) == x.
double yeo_johnson(double lambda, double x);

/// Box-Cox power transform; requires x > 0.
double box_cox(double lambda, double x);

/// Inverse standard normal CDF. Rational approximation with absolute error
/// <= 1.15e-9; inputs are clipped to (1e-12, 1 - 1e-12).
double norm_ppf(double p);

/// B-spline basis values at x for the given knot vector (with boundary knots
/// repeated degree+1 times). Returns knots.size() - degree - 1 basis values.
std::vector<double> bspline_basis(const std::vector<double>& knots, int degree, double x);

/// Extend base knots [t0..tK-1] with degree+1 multiplicity at both ends.
std::vector<double> clamped_knots(const std::vector<double>& base, int degree);

}  // namespace fedps
