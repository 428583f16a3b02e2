#pragma once

#include <functional>
#include <limits>
#include <span>

namespace raincal {

// Rainfall families with an atom at zero. Every CDF follows the same
// convention: F(y) = 0 for y < 0, F(0) = pi, and F is right-continuous.

/// Extended generalized Pareto with T(u) = u^kappa:
/// F(y) = pi + (1 - pi) * H_xi(y / sigma)^kappa for y > 0.
struct EgpParams {
  double pi = 0.0;
  double kappa = 1.0;
  double sigma = 1.0;
  double xi = 0.1;

  void validate() const;  // throws DomainError
};

/// Gamma(kappa, theta) shifted left by delta and censored at zero.
struct CsgParams {
  double pi = 0.0;
  double delta = 0.0;
  double kappa = 1.0;
  double theta = 1.0;

  /// Sets pi to the gamma mass below delta.
  static CsgParams censored(double delta, double kappa, double theta);
  void validate() const;
};

/// GEV(mu, sigma, xi) censored at zero, pi = G(0).
struct CgevParams {
  double pi = 0.0;
  double mu = 0.0;
  double sigma = 1.0;
  double xi = 0.1;

  static CgevParams censored(double mu, double sigma, double xi);
  void validate() const;
  /// mu - sigma / xi for xi < 0, +inf otherwise.
  double upper_support() const;
};

/// Probability weighted moments mu_r = E[Y (1 - F(Y))^r], r = 0, 1, 2.
struct PwmTriple {
  double mu0 = 0.0;
  double mu1 = 0.0;
  double mu2 = 0.0;

  /// mu0 >= 2 mu1 >= 0 and mu1 >= 1.5 mu2, up to `tol`.
  bool satisfies_invariants(double tol = 1e-12) const;
};

/// The (kappa, sigma, xi) part of an EGP, i.e. its positive-rain component.
struct EgpShape {
  double kappa = 1.0;
  double sigma = 1.0;
  double xi = 0.1;
};

/// Standard generalized Pareto CDF H_xi(x) = 1 - (1 + xi x)^(-1/xi), x >= 0.
double gp_cdf(double x, double xi);

double egp_cdf(double y, const EgpParams& p);
/// Throws DomainError("unbounded quantile") for prob = 1.
double egp_quantile(double prob, const EgpParams& p);
/// Closed-form CRPS for 0 < xi < 1; other shapes fall back to crps_numeric.
double egp_crps(const EgpParams& p, double y);

double csg_cdf(double y, const CsgParams& p);
double csg_quantile(double prob, const CsgParams& p);
/// Closed form in terms of gamma CDFs.
double csg_crps(const CsgParams& p, double y);

double cgev_cdf(double y, const CgevParams& p);
double cgev_quantile(double prob, const CgevParams& p);
/// Closed form via lower incomplete gammas; quadrature for |xi| < 1e-6.
double cgev_crps(const CgevParams& p, double y);

/// CRPS by adaptive quadrature of the integral of (F(x) - 1{x >= y})^2.
/// F must vanish below `lower` and equal 1 above `upper`. Absolute
/// tolerance 1e-8; throws NumericalError when the error estimate exceeds 1e-6.
double crps_numeric(const std::function<double(double)>& cdf, double y, double lower = 0.0,
                    double upper = std::numeric_limits<double>::infinity());

/// Exact PWM of the step-function quantile of a weighted sample:
/// mu_r = sum_i v_i [(1 - W_{i-1})^(r+1) - (1 - W_i)^(r+1)] / (r + 1).
/// Values ascending; weights non-negative and summing to 1 within 1e-9.
double pwm_weighted(std::span<const double> values, std::span<const double> weights, int r);
PwmTriple pwm_triple(std::span<const double> values, std::span<const double> weights);

/// Analytic PWMs of the positive part of an EGP.
PwmTriple egp_pwm(const EgpShape& shape);

/// Inverts egp_pwm. Throws InfeasibleError("PWM system infeasible") when no
/// root exists in kappa in (1e-3, 1e3), xi in (1e-6, 0.99).
EgpShape egp_fit_pwm(const PwmTriple& t);

}  // namespace raincal
