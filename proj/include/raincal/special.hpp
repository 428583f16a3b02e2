#pragma once

namespace raincal {

double beta_function(double a, double b);

/// Non-regularized incomplete beta B(z; a, b) = integral of t^(a-1) (1-t)^(b-1) over [0, z].
double incomplete_beta(double z, double a, double b);

/// Gamma CDF with shape `shape` and scale `scale`.
double gamma_cdf(double x, double shape, double scale = 1.0);
double gamma_quantile(double prob, double shape, double scale = 1.0);

/// Upper tail of the chi-square distribution.
double chi_square_sf(double x, double df);

/// Kolmogorov distribution survival function P(sqrt(n) D_n > x), asymptotic.
double kolmogorov_sf(double x);

}  // namespace raincal
