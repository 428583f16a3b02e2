#include "raincal/special.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "raincal/error.hpp"

namespace raincal {

double beta_function(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw DomainError("beta function needs a > 0 and b > 0");
  return boost::math::beta(a, b);
}

double incomplete_beta(double z, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0) || !(z >= 0.0 && z <= 1.0))
    throw DomainError("incomplete beta needs z in [0,1], a > 0, b > 0 (got z=" + std::to_string(z) + ")");
  if (z == 0.0) return 0.0;
  return boost::math::beta(a, b, z);
}

double gamma_cdf(double x, double shape, double scale) {
  if (!(shape > 0.0) || !(scale > 0.0)) throw DomainError("gamma cdf needs positive shape and scale");
  if (x <= 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  return boost::math::gamma_p(shape, x / scale);
}

double gamma_quantile(double prob, double shape, double scale) {
  if (!(shape > 0.0) || !(scale > 0.0)) throw DomainError("gamma quantile needs positive shape and scale");
  if (!(prob >= 0.0 && prob < 1.0)) throw DomainError("gamma quantile needs prob in [0,1)");
  if (prob == 0.0) return 0.0;
  return scale * boost::math::gamma_p_inv(shape, prob);
}

double chi_square_sf(double x, double df) {
  if (!(df > 0.0)) throw DomainError("chi-square needs df > 0");
  if (x <= 0.0) return 1.0;
  return boost::math::gamma_q(df / 2.0, x / 2.0);
}

double kolmogorov_sf(double x) {
  if (x <= 0.0) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    sum += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-17) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

}  // namespace raincal
