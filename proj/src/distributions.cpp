#include "raincal/distributions.hpp"

#include <algorithm>
#include <array>
#include <optional>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/roots.hpp>

#include "raincal/error.hpp"
#include "raincal/special.hpp"

namespace raincal {

namespace {

constexpr double kSmallXi = 1e-6;

// log(1 + xi x) / xi, with the xi -> 0 limit x.
double gp_log_term(double x, double xi) {
  if (std::abs(xi) < kSmallXi) return x - 0.5 * xi * x * x;
  return std::log1p(xi * x) / xi;
}

void require(bool ok, const char* what) {
  if (!ok) throw DomainError(what);
}

}  // namespace

// ---------------------------------------------------------------------------
// Parameter validation

void EgpParams::validate() const {
  require(pi >= 0.0 && pi <= 1.0, "EGP: pi must lie in [0,1]");
  require(kappa > 0.0 && std::isfinite(kappa), "EGP: kappa must be positive");
  require(sigma > 0.0 && std::isfinite(sigma), "EGP: sigma must be positive");
  require(xi >= 0.0 && xi < 1.0, "EGP: xi must lie in [0,1)");
}

CsgParams CsgParams::censored(double delta, double kappa, double theta) {
  CsgParams p{0.0, delta, kappa, theta};
  p.validate();
  p.pi = gamma_cdf(delta, kappa, theta);
  return p;
}

void CsgParams::validate() const {
  require(pi >= 0.0 && pi <= 1.0, "CSG: pi must lie in [0,1]");
  require(delta >= 0.0 && std::isfinite(delta), "CSG: delta must be non-negative");
  require(kappa > 0.0 && std::isfinite(kappa), "CSG: kappa must be positive");
  require(theta > 0.0 && std::isfinite(theta), "CSG: theta must be positive");
}

CgevParams CgevParams::censored(double mu, double sigma, double xi) {
  CgevParams p{0.0, mu, sigma, xi};
  p.validate();
  p.pi = 0.0;
  p.pi = cgev_cdf(0.0, p);
  return p;
}

void CgevParams::validate() const {
  require(pi >= 0.0 && pi <= 1.0, "CGEV: pi must lie in [0,1]");
  require(std::isfinite(mu), "CGEV: mu must be finite");
  require(sigma > 0.0 && std::isfinite(sigma), "CGEV: sigma must be positive");
  require(xi < 1.0, "CGEV: xi must be below 1");
}

double CgevParams::upper_support() const {
  return xi < -kSmallXi ? mu - sigma / xi : std::numeric_limits<double>::infinity();
}

bool PwmTriple::satisfies_invariants(double tol) const {
  return mu1 >= -tol && mu0 - 2.0 * mu1 >= -tol && mu1 - 1.5 * mu2 >= -tol;
}

// ---------------------------------------------------------------------------
// EGP

double gp_cdf(double x, double xi) {
  if (x <= 0.0) return 0.0;
  return -std::expm1(-gp_log_term(x, xi));
}

double egp_cdf(double y, const EgpParams& p) {
  p.validate();
  if (y < 0.0) return 0.0;
  if (y == 0.0) return p.pi;
  if (std::isinf(y)) return 1.0;
  return p.pi + (1.0 - p.pi) * std::pow(gp_cdf(y / p.sigma, p.xi), p.kappa);
}

double egp_quantile(double prob, const EgpParams& p) {
  p.validate();
  if (!(prob >= 0.0 && prob <= 1.0)) throw DomainError("EGP quantile: prob must lie in [0,1]");
  if (prob >= 1.0) throw DomainError("unbounded quantile");
  if (prob <= p.pi) return 0.0;
  const double u = std::pow((prob - p.pi) / (1.0 - p.pi), 1.0 / p.kappa);
  const double log_tail = std::log1p(-u);  // log(1 - u)
  if (p.xi < kSmallXi) return -p.sigma * log_tail * (1.0 - 0.5 * p.xi * log_tail);
  return p.sigma * std::expm1(-p.xi * log_tail) / p.xi;
}

double egp_crps(const EgpParams& p, double y) {
  p.validate();
  if (y < 0.0) throw DomainError("EGP CRPS: observation must be non-negative");
  // Below xi = 1e-3 the sigma/xi terms cancel badly; integrate instead.
  if (p.xi < 1e-3) return crps_numeric([&p](double x) { return egp_cdf(x, p); }, y);

  const double pi = p.pi, kappa = p.kappa, sigma = p.sigma, xi = p.xi;
  const double f = egp_cdf(y, p);
  const double z = std::exp(-gp_log_term(y / sigma, xi));  // (1 + xi y / sigma)^(-1/xi)
  const double a = 1.0 - xi;
  const double bracket = incomplete_beta(z, a, kappa) - (1.0 - pi) * beta_function(a, 2.0 * kappa) -
                         pi * beta_function(a, kappa);
  return y * (2.0 * f - 1.0) + sigma / xi * (2.0 * f - pi * pi - 1.0) +
         2.0 * kappa * sigma * (1.0 - pi) / xi * bracket;
}

// ---------------------------------------------------------------------------
// CSG

double csg_cdf(double y, const CsgParams& p) {
  p.validate();
  if (y < 0.0) return 0.0;
  return gamma_cdf(y + p.delta, p.kappa, p.theta);
}

double csg_quantile(double prob, const CsgParams& p) {
  p.validate();
  if (!(prob >= 0.0 && prob < 1.0)) throw DomainError("CSG quantile: prob must lie in [0,1)");
  const double pi = gamma_cdf(p.delta, p.kappa, p.theta);
  if (prob <= pi) return 0.0;
  return std::max(0.0, gamma_quantile(prob, p.kappa, p.theta) - p.delta);
}

double csg_crps(const CsgParams& p, double y) {
  p.validate();
  if (y < 0.0) throw DomainError("CSG CRPS: observation must be non-negative");
  const double k = p.kappa, th = p.theta;
  const double yt = (y + p.delta) / th;
  const double c = p.delta / th;
  auto F = [](double shape, double x) { return gamma_cdf(x, shape); };
  const double fc = F(k, c);
  const double half_beta = beta_function(0.5, k + 0.5) / std::numbers::pi;
  return th * yt * (2.0 * F(k, yt) - 1.0) - th * c * fc * fc +
         th * k * (1.0 + 2.0 * fc * F(k + 1.0, c) - fc * fc - 2.0 * F(k + 1.0, yt)) -
         th * k * half_beta * (1.0 - F(2.0 * k, 2.0 * c));
}

// ---------------------------------------------------------------------------
// CGEV

double cgev_cdf(double y, const CgevParams& p) {
  p.validate();
  if (y < 0.0) return 0.0;
  const double zscore = (y - p.mu) / p.sigma;
  double t;
  if (std::abs(p.xi) < kSmallXi) {
    t = std::exp(-zscore + 0.5 * p.xi * zscore * zscore);
  } else {
    const double base = 1.0 + p.xi * zscore;
    if (base <= 0.0) return p.xi > 0.0 ? 0.0 : 1.0;
    t = std::exp(-std::log(base) / p.xi);
  }
  return std::exp(-t);
}

double cgev_quantile(double prob, const CgevParams& p) {
  p.validate();
  if (!(prob >= 0.0 && prob < 1.0)) throw DomainError("CGEV quantile: prob must lie in [0,1)");
  if (prob <= cgev_cdf(0.0, p)) return 0.0;
  const double l = -std::log(-std::log(prob));  // Gumbel reduced variate
  if (std::abs(p.xi) < kSmallXi) return std::max(0.0, p.mu + p.sigma * l);
  return std::max(0.0, p.mu + p.sigma * std::expm1(p.xi * l) / p.xi);
}

// Quantile representation CRPS = y(2F(y) - 1) + 2 I1(F(y)) - 2 I2(pi), where
// I1(a) and I2(a) integrate Q(u) and u Q(u) over [a, 1] for the GEV quantile
// Q(u) = mu - sigma/xi + (sigma/xi)(-log u)^(-xi); both reduce to lower
// incomplete gammas of order 1 - xi.
double cgev_crps(const CgevParams& p, double y) {
  p.validate();
  if (y < 0.0) throw DomainError("CGEV CRPS: observation must be non-negative");
  if (std::abs(p.xi) < kSmallXi)
    return crps_numeric([&p](double x) { return cgev_cdf(x, p); }, y, 0.0, p.upper_support());
  const double a = 1.0 - p.xi;
  const double c = p.mu - p.sigma / p.xi;
  const double r = p.sigma / p.xi;
  auto lower_gamma = [a](double x) {
    if (x <= 0.0) return 0.0;
    if (std::isinf(x)) return std::tgamma(a);
    return boost::math::tgamma_lower(a, x);
  };
  auto neg_log = [](double u) { return u <= 0.0 ? std::numeric_limits<double>::infinity() : -std::log(u); };
  const double p0 = cgev_cdf(0.0, p);
  const double py = cgev_cdf(y, p);
  const double i1 = c * (1.0 - py) + r * lower_gamma(neg_log(py));
  const double i2 = 0.5 * c * (1.0 - p0 * p0) + r * std::exp2(p.xi - 1.0) * lower_gamma(2.0 * neg_log(p0));
  return y * (2.0 * py - 1.0) + 2.0 * i1 - 2.0 * i2;
}

// ---------------------------------------------------------------------------
// Quadrature

double crps_numeric(const std::function<double(double)>& cdf, double y, double lower, double upper) {
  if (!(upper > lower)) throw DomainError("crps_numeric: empty support");
  constexpr double kTol = 1e-10;
  constexpr double kMaxError = 1e-6;
  double total = 0.0;
  double error = 0.0;

  if (y < lower) total += lower - y;  // F = 0 while the step is already 1
  const double split = std::clamp(y, lower, upper);

  if (split > lower) {
    static thread_local boost::math::quadrature::tanh_sinh<double> integrator;
    double err = 0.0;
    auto below = [&](double x) {
      const double f = cdf(x);
      return f * f;
    };
    total += integrator.integrate(below, lower, split, kTol, &err);
    error += err;
  }
  if (std::isinf(upper)) {
    static thread_local boost::math::quadrature::exp_sinh<double> integrator;
    double err = 0.0;
    auto above = [&](double x) {
      const double s = 1.0 - cdf(x);
      return s * s;
    };
    total += integrator.integrate(above, split, upper, kTol, &err);
    error += err;
  } else if (upper > split) {
    static thread_local boost::math::quadrature::tanh_sinh<double> integrator;
    double err = 0.0;
    auto above = [&](double x) {
      const double s = 1.0 - cdf(x);
      return s * s;
    };
    total += integrator.integrate(above, split, upper, kTol, &err);
    error += err;
  }
  if (y > upper) total += y - upper;  // F = 1 while the step is still 0
  if (!std::isfinite(total) || error > kMaxError)
    throw NumericalError("CRPS quadrature did not converge (error estimate " + std::to_string(error) + ")");
  return total;
}

// ---------------------------------------------------------------------------
// Probability weighted moments

double pwm_weighted(std::span<const double> values, std::span<const double> weights, int r) {
  if (values.size() != weights.size() || values.empty())
    throw DomainError("pwm_weighted: values and weights must be non-empty and of equal length");
  if (r < 0 || r > 2) throw DomainError("pwm_weighted: order must be 0, 1 or 2");
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw DomainError("pwm_weighted: negative weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw DomainError("pwm_weighted: weights not normalized");

  const double order = r + 1.0;
  double cumulative = 0.0;
  double upper_tail = 1.0;  // (1 - W_{i-1})^(r+1)
  double mu = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0 && values[i] < values[i - 1]) throw DomainError("pwm_weighted: values must be sorted ascending");
    cumulative += weights[i];
    const double next = std::pow(std::max(0.0, 1.0 - cumulative), order);
    mu += values[i] * (upper_tail - next);
    upper_tail = next;
  }
  return mu / order;
}

PwmTriple pwm_triple(std::span<const double> values, std::span<const double> weights) {
  return {pwm_weighted(values, weights, 0), pwm_weighted(values, weights, 1), pwm_weighted(values, weights, 2)};
}

namespace {

// (a B(a, 1 - xi) - 1) / xi, with its xi -> 0 limit psi(a + 1) - psi(1).
double scaled_beta_excess(double a, double xi) {
  if (xi < kSmallXi) return boost::math::digamma(a + 1.0) - boost::math::digamma(1.0);
  // a B(a, 1 - xi) = Gamma(1 - xi) Gamma(a + 1) / Gamma(a + 1 - xi)
  const double log_ratio = boost::math::lgamma(1.0 - xi) -
                           std::log(boost::math::tgamma_delta_ratio(a + 1.0 - xi, xi));
  return std::expm1(log_ratio) / xi;
}

struct PwmFactors {
  double h1, h2, h3;
};

PwmFactors pwm_factors(double kappa, double xi) {
  return {scaled_beta_excess(kappa, xi), scaled_beta_excess(2.0 * kappa, xi), scaled_beta_excess(3.0 * kappa, xi)};
}

// mu_r / sigma
std::array<double, 3> unit_pwms(double kappa, double xi) {
  const auto f = pwm_factors(kappa, xi);
  return {f.h1, f.h1 - 0.5 * f.h2, f.h1 - f.h2 + f.h3 / 3.0};
}

constexpr double kKappaMin = 1e-3;
constexpr double kKappaMax = 1e3;
constexpr double kXiMin = 1e-6;
constexpr double kXiMax = 0.99;

double ratio1(double log_kappa, double xi) {
  const auto u = unit_pwms(std::exp(log_kappa), xi);
  return u[1] / u[0];
}

double ratio2(double log_kappa, double xi) {
  const auto u = unit_pwms(std::exp(log_kappa), xi);
  return u[2] / u[0];
}

template <typename F>
double bracket_root(F&& f, double lo, double hi) {
  std::uintmax_t max_iter = 200;
  auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(52), max_iter);
  return 0.5 * (a + b);
}

// log kappa solving mu1/mu0 = r1 at fixed xi; mu1/mu0 increases with kappa.
std::optional<double> solve_log_kappa(double r1, double xi) {
  const double lo = std::log(kKappaMin), hi = std::log(kKappaMax);
  const double f_lo = ratio1(lo, xi) - r1, f_hi = ratio1(hi, xi) - r1;
  if (f_lo > 0.0 || f_hi < 0.0) return std::nullopt;
  if (f_lo == 0.0) return lo;
  if (f_hi == 0.0) return hi;
  return bracket_root([&](double u) { return ratio1(u, xi) - r1; }, lo, hi);
}

}  // namespace

PwmTriple egp_pwm(const EgpShape& shape) {
  if (!(shape.kappa > 0.0) || !(shape.sigma > 0.0) || !(shape.xi >= 0.0 && shape.xi < 1.0))
    throw DomainError("egp_pwm: need kappa > 0, sigma > 0, 0 <= xi < 1");
  const auto u = unit_pwms(shape.kappa, shape.xi);
  return {shape.sigma * u[0], shape.sigma * u[1], shape.sigma * u[2]};
}

EgpShape egp_fit_pwm(const PwmTriple& t) {
  if (!(t.mu0 > 0.0) || !t.satisfies_invariants(1e-12 * t.mu0) || !std::isfinite(t.mu0))
    throw InfeasibleError("PWM system infeasible: moments violate the ordering constraints");
  const double r1 = t.mu1 / t.mu0;
  const double r2 = t.mu2 / t.mu0;

  // mu1/mu0 increases with kappa and decreases with xi, so kappa(xi) exists on
  // an interval [xi_lo, xi_hi] bounded by the kappa_min and kappa_max curves.
  // Along that curve mu2/mu0 increases with xi.
  const double lk_min = std::log(kKappaMin), lk_max = std::log(kKappaMax);
  auto bisect = [](auto&& holds_high, double a, double b) {
    // holds_high(b) is true, holds_high(a) false; returns the boundary from the true side.
    for (int i = 0; i < 200 && b - a > 1e-15; ++i) {
      const double m = 0.5 * (a + b);
      (holds_high(m) ? b : a) = m;
    }
    return b;
  };
  auto above_min_curve = [&](double xi) { return ratio1(lk_min, xi) <= r1; };
  auto below_max_curve = [&](double xi) { return ratio1(lk_max, xi) >= r1; };
  if (!above_min_curve(kXiMax) || !below_max_curve(kXiMin))
    throw InfeasibleError("PWM system infeasible: mu1/mu0 outside the attainable range");
  const double xi_lo = above_min_curve(kXiMin) ? kXiMin : bisect(above_min_curve, kXiMin, kXiMax);
  const double xi_hi =
      below_max_curve(kXiMax) ? kXiMax : bisect([&](double x) { return !below_max_curve(x); }, kXiMin, kXiMax);
  if (xi_lo > xi_hi) throw InfeasibleError("PWM system infeasible: mu1/mu0 outside the attainable range");

  auto log_kappa_at = [&](double xi) {
    if (auto lk = solve_log_kappa(r1, xi)) return *lk;
    return ratio1(lk_min, xi) > r1 ? lk_min : lk_max;  // boundary rounding
  };
  auto r2_gap = [&](double xi) { return ratio2(log_kappa_at(xi), xi) - r2; };
  const double g_lo = r2_gap(xi_lo), g_hi = r2_gap(xi_hi);
  double xi;
  if (g_lo == 0.0) xi = xi_lo;
  else if (g_hi == 0.0) xi = xi_hi;
  else if (g_lo < 0.0 && g_hi > 0.0) xi = bracket_root(r2_gap, xi_lo, xi_hi);
  else throw InfeasibleError("PWM system infeasible: mu2/mu0 outside the attainable range");

  const double kappa = std::exp(log_kappa_at(xi));
  const double sigma = t.mu0 / unit_pwms(kappa, xi)[0];
  const EgpShape shape{kappa, sigma, xi};

  const auto check = egp_pwm(shape);
  const double residual = std::max({std::abs(check.mu0 - t.mu0) / t.mu0, std::abs(check.mu1 - t.mu1) / t.mu0,
                                    std::abs(check.mu2 - t.mu2) / t.mu0});
  if (!(residual < 1e-8)) throw InfeasibleError("PWM system infeasible: residual " + std::to_string(residual));
  return shape;
}

}  // namespace raincal
