#include <doctest.h>

#include <cmath>
#include <vector>

#include "raincal/distributions.hpp"
#include "raincal/error.hpp"
#include "raincal/random.hpp"
#include "raincal/simlab.hpp"
#include "raincal/special.hpp"

using namespace raincal;

TEST_SUITE("special") {
  TEST_CASE("incomplete beta endpoints and uniform integrand") {
    CHECK(incomplete_beta(0.0, 2.0, 3.0) == 0.0);
    CHECK(incomplete_beta(1.0, 2.0, 3.0) == doctest::Approx(beta_function(2.0, 3.0)).epsilon(1e-14));
    CHECK(incomplete_beta(0.5, 1.0, 1.0) == doctest::Approx(0.5).epsilon(1e-15));
    // B(0.3; 2, 1) = 0.3^2 / 2
    CHECK(incomplete_beta(0.3, 2.0, 1.0) == doctest::Approx(0.045).epsilon(1e-14));
  }

  TEST_CASE("gamma cdf and quantile") {
    CHECK(gamma_cdf(0.5, 1.0) == doctest::Approx(1.0 - std::exp(-0.5)).epsilon(1e-15));
    for (double p : {0.01, 0.3, 0.9, 0.999}) CHECK(gamma_cdf(gamma_quantile(p, 2.5, 1.5), 2.5, 1.5) == doctest::Approx(p).epsilon(1e-12));
  }

  TEST_CASE("chi-square tail") {
    // P(chi2_1 > 3.841459) = 0.05
    CHECK(chi_square_sf(3.841458820694124, 1.0) == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(chi_square_sf(0.0, 4.0) == 1.0);
  }
}

TEST_SUITE("egp") {
  TEST_CASE("cdf examples") {
    const EgpParams p{0.3, 2.0, 1.0, 0.2};
    CHECK(egp_cdf(0.0, p) == 0.3);
    CHECK(egp_cdf(-1.0, p) == 0.0);
    const double expected = 0.3 + 0.7 * std::pow(1.0 - std::pow(1.2, -5.0), 2.0);
    CHECK(egp_cdf(1.0, p) == doctest::Approx(expected).epsilon(1e-15));
    CHECK(egp_cdf(1.0, p) == doctest::Approx(0.5504).epsilon(1e-4));
    // pi = 0, kappa = 1: pure GP
    CHECK(egp_cdf(2.0, {0.0, 1.0, 1.5, 0.3}) == doctest::Approx(gp_cdf(2.0 / 1.5, 0.3)).epsilon(1e-15));
  }

  TEST_CASE("quantile examples and errors") {
    const EgpParams gp{0.0, 1.0, 1.0, 0.2};
    CHECK(egp_quantile(0.5, gp) == doctest::Approx((std::pow(0.5, -0.2) - 1.0) / 0.2).epsilon(1e-14));
    CHECK(egp_quantile(0.5, gp) == doctest::Approx(0.7435).epsilon(1e-4));
    CHECK(egp_quantile(0.4, {0.4, 1.5, 2.0, 0.2}) == 0.0);
    CHECK_THROWS_AS(egp_quantile(1.0, gp), DomainError);
    CHECK_THROWS_WITH(egp_quantile(1.0, gp), doctest::Contains("unbounded quantile"));
  }

  TEST_CASE("quantile inverts cdf on a grid") {
    for (double pi : {0.0, 0.3, 0.7})
      for (double kappa : {0.5, 1.0, 2.0})
        for (double sigma : {0.5, 1.0, 5.0})
          for (double xi : {0.05, 0.2, 0.5})
            for (double y : {0.1, 1.0, 10.0}) {
              const EgpParams p{pi, kappa, sigma, xi};
              CHECK(egp_quantile(egp_cdf(y, p), p) == doctest::Approx(y).epsilon(1e-9));
            }
  }

  TEST_CASE("closed-form crps against frozen quadrature values") {
    // mpmath quadrature of the integral of (F - 1{x >= y})^2, 30 digits
    CHECK(egp_crps({0.3, 2.0, 1.0, 0.2}, 1.0) == doctest::Approx(0.332761293526375).epsilon(1e-12));
    CHECK(egp_crps({0.0, 1.0, 1.0, 0.2}, 0.0) == doctest::Approx(1.0 / 1.8).epsilon(1e-12));
    CHECK(egp_crps({0.7, 0.5, 5.0, 0.5}, 10.0) == doctest::Approx(8.236552926464491).epsilon(1e-12));
    CHECK(egp_crps({0.0, 1.5, 2.0, 0.3}, 3.0) == doctest::Approx(0.7080953421774925).epsilon(1e-12));
  }

  TEST_CASE("crps near a point mass at zero") {
    CHECK(egp_crps({1.0 - 1e-9, 1.0, 1.0, 0.2}, 0.0) < 1e-8);
  }

  TEST_CASE("crps matches the numeric route") {
    const EgpParams p{0.4, 1.3, 2.2, 0.35};
    for (double y : {0.0, 0.5, 4.0, 30.0}) {
      const double num = crps_numeric([&](double x) { return egp_cdf(x, p); }, y);
      CHECK(egp_crps(p, y) == doctest::Approx(num).epsilon(1e-8));
    }
  }
}

TEST_SUITE("csg and cgev") {
  TEST_CASE("censoring mass") {
    CHECK(CsgParams::censored(0.0, 2.0, 1.0).pi == 0.0);
    CHECK(CsgParams::censored(0.5, 1.0, 1.0).pi == doctest::Approx(1.0 - std::exp(-0.5)).epsilon(1e-15));
    CHECK(csg_cdf(0.0, CsgParams::censored(0.5, 1.0, 1.0)) == doctest::Approx(0.3935).epsilon(1e-4));
    CHECK(CgevParams::censored(50.0, 1.0, 0.1).pi < 1e-12);
  }

  TEST_CASE("csg crps against frozen quadrature values") {
    CHECK(csg_crps(CsgParams::censored(0.5, 1.0, 1.0), 0.0) == doctest::Approx(0.1839397205857211).epsilon(1e-10));
    CHECK(csg_crps(CsgParams::censored(0.5, 1.0, 1.0), 2.0) == doctest::Approx(1.135048398408252).epsilon(1e-10));
    CHECK(csg_crps(CsgParams::censored(1.0, 2.5, 1.5), 0.7) == doctest::Approx(0.9951020518049528).epsilon(1e-10));
    CHECK(csg_crps(CsgParams::censored(0.2, 0.6, 3.0), 4.0) == doctest::Approx(1.949429023265086).epsilon(1e-10));
  }

  TEST_CASE("cgev crps against frozen quadrature values") {
    CHECK(cgev_crps(CgevParams::censored(1.0, 1.0, 0.2), 0.5) == doctest::Approx(0.5825895815576523).epsilon(1e-9));
    CHECK(cgev_crps(CgevParams::censored(0.5, 2.0, 0.4), 3.0) == doctest::Approx(1.038527955850393).epsilon(1e-9));
    CHECK(cgev_crps(CgevParams::censored(2.0, 1.0, -0.2), 0.0) == doctest::Approx(1.816998854666074).epsilon(1e-9));
    CHECK(cgev_crps(CgevParams::censored(0.3, 0.8, 0.1), 1.2) == doctest::Approx(0.3560751642426784).epsilon(1e-9));
  }

  TEST_CASE("cdfs are monotone with atom at zero and reach one") {
    const auto c = CsgParams::censored(0.8, 1.7, 2.0);
    const auto g = CgevParams::censored(0.4, 1.2, 0.25);
    double prev_c = 0.0, prev_g = 0.0;
    for (double y = 0.0; y < 60.0; y += 0.25) {
      CHECK(csg_cdf(y, c) >= prev_c);
      CHECK(cgev_cdf(y, g) >= prev_g);
      prev_c = csg_cdf(y, c);
      prev_g = cgev_cdf(y, g);
    }
    CHECK(csg_cdf(0.0, c) == doctest::Approx(c.pi));
    CHECK(cgev_cdf(0.0, g) == doctest::Approx(g.pi));
    CHECK(csg_cdf(csg_quantile(1.0 - 1e-9, c), c) == doctest::Approx(1.0 - 1e-9).epsilon(1e-12));
    CHECK(cgev_cdf(cgev_quantile(1.0 - 1e-9, g), g) == doctest::Approx(1.0 - 1e-9).epsilon(1e-12));
  }
}

TEST_SUITE("crps_numeric") {
  TEST_CASE("uniform on [0,1] at zero") {
    const double v = crps_numeric([](double x) { return x <= 0.0 ? 0.0 : (x >= 1.0 ? 1.0 : x); }, 0.0, 0.0, 1.0);
    CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-10));
  }
  TEST_CASE("point mass at the observation") {
    CHECK(crps_numeric([](double x) { return x >= 2.0 ? 1.0 : 0.0; }, 2.0, 0.0, 5.0) == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_SUITE("pwm") {
  TEST_CASE("weighted pwm of small samples") {
    const std::vector<double> v{3.0};
    const std::vector<double> w{1.0};
    for (int r = 0; r < 3; ++r) CHECK(pwm_weighted(v, w, r) == doctest::Approx(3.0 / (r + 1)).epsilon(1e-15));
    const std::vector<double> v2{0.0, 2.0};
    const std::vector<double> w2{0.5, 0.5};
    CHECK(pwm_weighted(v2, w2, 0) == doctest::Approx(1.0).epsilon(1e-15));
  }

  TEST_CASE("analytic pwm against frozen quadrature values") {
    auto t = egp_pwm({1.0, 1.0, 0.2});
    CHECK(t.mu0 == doctest::Approx(1.25).epsilon(1e-12));
    CHECK(t.mu1 == doctest::Approx(0.2777777777777778).epsilon(1e-12));
    CHECK(t.mu2 == doctest::Approx(0.1190476190476191).epsilon(1e-12));
    t = egp_pwm({2.0, 0.5, 0.4});
    CHECK(t.mu0 == doctest::Approx(1.354166666666667).epsilon(1e-12));
    CHECK(t.mu1 == doctest::Approx(0.3098290598290599).epsilon(1e-12));
    CHECK(t.mu2 == doctest::Approx(0.1448943568508786).epsilon(1e-12));
    t = egp_pwm({0.5, 3.0, 0.1});
    CHECK(t.mu0 == doctest::Approx(2.021395793923257).epsilon(1e-12));
    CHECK(t.mu1 == doctest::Approx(0.3547291272565905).epsilon(1e-12));
    CHECK(t.mu2 == doctest::Approx(0.1242752441339442).epsilon(1e-12));
    CHECK(t.satisfies_invariants());
  }

  TEST_CASE("fit recovers the generating shape") {
    const auto s = egp_fit_pwm(egp_pwm({1.0, 1.0, 0.2}));
    CHECK(s.kappa == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(s.sigma == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(s.xi == doctest::Approx(0.2).epsilon(1e-6));
  }

  TEST_CASE("point mass is infeasible") {
    CHECK_THROWS_AS(egp_fit_pwm({2.0, 1.0, 2.0 / 3.0}), InfeasibleError);
  }

  TEST_CASE("sample mean of GP draws approaches sigma / (1 - xi)") {
    Rng rng(7);
    const EgpParams gp{0.0, 1.0, 1.0, 0.2};
    std::vector<double> v(200000);
    for (auto& x : v) x = sample_egp(gp, rng);
    std::sort(v.begin(), v.end());
    std::vector<double> w(v.size(), 1.0 / static_cast<double>(v.size()));
    CHECK(pwm_weighted(v, w, 0) == doctest::Approx(1.25).epsilon(0.02));
  }
}
