#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "raincal/ecdf.hpp"
#include "raincal/error.hpp"
#include "raincal/predictive.hpp"
#include "raincal/random.hpp"
#include "raincal/simlab.hpp"
#include "raincal/special.hpp"
#include "raincal/tail_hybrid.hpp"
#include "raincal/verification.hpp"

using namespace raincal;

TEST_SUITE("ecdf") {
  TEST_CASE("generalized inverse") {
    const std::vector<double> v{0.0, 5.0}, w{0.5, 0.5};
    const auto e = WeightedEcdf::from_weighted(v, w);
    CHECK(ecdf_quantile(e, 0.5) == 0.0);
    CHECK(ecdf_quantile(e, 0.75) == 5.0);
    CHECK(e.cdf_left(5.0) == 0.5);
    CHECK(e.cdf(5.0) == 1.0);
  }

  TEST_CASE("quantile matches a linear scan") {
    Rng rng(8);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t n = 1 + uniform_index(rng, 12);
      std::vector<double> v(n), w(n);
      for (std::size_t i = 0; i < n; ++i) {
        v[i] = std::floor(10.0 * uniform01(rng));
        w[i] = uniform01(rng);
      }
      const auto e = WeightedEcdf::from_weighted(v, w);
      const double p = uniform01(rng);
      double cum = 0.0, scan = e.values.back();
      for (std::size_t i = 0; i < e.size(); ++i) {
        cum += e.weights[i];
        if (cum >= p - 1e-12) {
          scan = e.values[i];
          break;
        }
      }
      CHECK(ecdf_quantile(e, p) == scan);
    }
  }
}

TEST_SUITE("crps") {
  TEST_CASE("fair crps hand cases") {
    const std::vector<double> a{0.0, 2.0}, b{0.0, 1.0, 2.0}, c{3.0, 3.0, 3.0};
    CHECK(fair_crps(a, 1.0) == 0.0);
    CHECK(fair_crps(b, 5.0) == 10.0 / 3.0);
    CHECK(fair_crps(c, 3.0) == 0.0);
    const std::vector<double> one{1.0};
    CHECK_THROWS_AS(fair_crps(one, 1.0), DomainError);
  }

  TEST_CASE("fair crps matches the double sum") {
    Rng rng(12);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t k = 2 + uniform_index(rng, 20);
      std::vector<double> x(k);
      for (auto& v : x) v = uniform01(rng) < 0.3 ? 0.0 : 5.0 * uniform01(rng);
      const double y = 4.0 * uniform01(rng);
      double t1 = 0.0, t2 = 0.0;
      for (double xi : x) t1 += std::abs(xi - y);
      for (double xi : x)
        for (double xj : x) t2 += std::abs(xi - xj);
      const double kk = static_cast<double>(k);
      CHECK(fair_crps(x, y) == doctest::Approx(t1 / kk - t2 / (2.0 * kk * (kk - 1.0))).epsilon(1e-12));
    }
  }

  TEST_CASE("weighted kernel crps") {
    const std::vector<double> v{2.5}, w{1.0};
    CHECK(weighted_kernel_crps(WeightedEcdf::from_weighted(v, w), 1.0) == 1.5);
    // uniform weights: kernel form differs from the fair form by the spread factor (K - 1) / K
    const std::vector<double> x{0.0, 1.0, 4.0, 6.0};
    const double y = 2.0;
    double spread = 0.0;
    for (double a : x)
      for (double b : x) spread += std::abs(a - b);
    const double kernel = weighted_kernel_crps(WeightedEcdf::uniform(x), y);
    const double fair = fair_crps(x, y);
    CHECK(kernel - fair == doctest::Approx(spread / (2.0 * 4.0 * 3.0) - spread / (2.0 * 16.0)).epsilon(1e-14));
  }

  TEST_CASE("parametric crps against a large-sample kernel estimate") {
    const EgpParams p{0.3, 1.2, 2.0, 0.25};
    const double y = 3.0;
    const auto mc = mc_crps([&](Rng& r) { return sample_egp(p, r); }, y, 1000000, 99);
    CHECK(std::abs(egp_crps(p, y) - mc.value) < 3.0 * mc.standard_error);
  }

  TEST_CASE("crpss") {
    CHECK(crpss(0.4212, 0.4694) == doctest::Approx(0.1027).epsilon(1e-3));
    CHECK(crpss(0.5277, 0.4694) == doctest::Approx(-0.1242).epsilon(1e-3));
    CHECK(crpss(1.0, 1.0) == 0.0);
    CHECK_THROWS_AS(crpss(1.0, 0.0), DomainError);
  }

  TEST_CASE("predictive json round trip") {
    const std::vector<PredictiveDistribution> all{
        EgpParams{0.2, 1.1, 2.0, 0.3}, CsgParams::censored(0.4, 1.5, 2.0), CgevParams::censored(1.0, 1.5, 0.2),
        WeightedEcdf::uniform(std::vector<double>{0.0, 1.5, 3.0}), Ensemble{{0.1, 0.2, 0.3}}};
    for (const auto& p : all) {
      const auto back = predictive_from_json(nlohmann::json::parse(to_json(p).dump()));
      CHECK(family_name(back) == family_name(p));
      CHECK(crps_of_predictive(back, 1.3) == crps_of_predictive(p, 1.3));
    }
  }
}

TEST_SUITE("tail hybrid") {
  TEST_CASE("all dry ecdf falls back") {
    const std::vector<double> v{0.0};
    const auto h = fit_egp_tail(WeightedEcdf::uniform(v));
    CHECK(h.fallback_used);
    CHECK(predictive_cdf(h.distribution(), 0.0) == 1.0);
  }

  TEST_CASE("two positive values fall back") {
    const std::vector<double> v{0.0, 1.0, 2.0};
    CHECK(fit_egp_tail(WeightedEcdf::uniform(v)).fallback_used);
  }

  TEST_CASE("recovers parameters from a large sample") {
    Rng rng(23);
    const EgpParams truth{0.4, 1.5, 2.0, 0.2};
    std::vector<double> draws(100000);
    for (auto& d : draws) d = sample_egp(truth, rng);
    const auto h = fit_egp_tail(WeightedEcdf::uniform(draws));
    REQUIRE_FALSE(h.fallback_used);
    CHECK(std::abs(h.egp.pi - 0.4) <= 0.01);
    CHECK(std::abs(h.egp.kappa - 1.5) <= 0.1);
    CHECK(std::abs(h.egp.sigma - 2.0) <= 0.1);
    CHECK(std::abs(h.egp.xi - 0.2) <= 0.05);
  }
}

TEST_SUITE("ranks and pit") {
  TEST_CASE("rank extremes") {
    Rng rng(1);
    const std::vector<double> m{1.0, 2.0, 3.0};
    CHECK(rank_of_obs(m, 10.0, rng) == 4);
    CHECK(rank_of_obs(m, 0.5, rng) == 1);
  }

  TEST_CASE("ties at zero are spread uniformly") {
    Rng rng(2);
    const std::vector<double> m(4, 0.0);
    std::vector<double> counts(5, 0.0);
    const std::size_t n = 100000;
    for (std::size_t i = 0; i < n; ++i) counts[rank_of_obs(m, 0.0, rng) - 1] += 1.0;
    double chi2 = 0.0;
    for (double c : counts) chi2 += (c - n / 5.0) * (c - n / 5.0) / (n / 5.0);
    CHECK(chi_square_sf(chi2, 4.0) > 0.001);
  }

  TEST_CASE("pit of a continuous point and of the dry atom") {
    Rng rng(3);
    CHECK(pit_value(0.7, 0.7, rng) == 0.7);
    const EgpParams p{0.4, 1.0, 1.0, 0.2};
    std::vector<double> z(100000);
    for (auto& v : z) v = pit_value(p, 0.0, rng);
    std::sort(z.begin(), z.end());
    double d = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double f = std::clamp(z[i] / 0.4, 0.0, 1.0);
      d = std::max({d, std::abs(f - static_cast<double>(i + 1) / z.size()), std::abs(f - static_cast<double>(i) / z.size())});
    }
    CHECK(kolmogorov_sf(std::sqrt(static_cast<double>(z.size())) * d) > 0.01);
  }

  TEST_CASE("calibrated pairs give uniform pit") {
    Rng rng(4);
    std::vector<double> z(20000);
    for (auto& v : z) {
      const EgpParams p{uniform01(rng) * 0.6, 0.5 + uniform01(rng), 0.5 + 3.0 * uniform01(rng), 0.2};
      v = pit_value(p, sample_egp(p, rng), rng);
    }
    std::sort(z.begin(), z.end());
    double d = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i)
      d = std::max({d, std::abs(z[i] - static_cast<double>(i + 1) / z.size()), std::abs(z[i] - static_cast<double>(i) / z.size())});
    CHECK(kolmogorov_sf(std::sqrt(static_cast<double>(z.size())) * d) > 0.01);
  }
}

TEST_SUITE("histogram") {
  TEST_CASE("uniform and degenerate counts") {
    RankHistogram flat{{10, 10, 10, 10, 10}};
    const auto s = histogram_stats(flat);
    CHECK(s.ez == doctest::Approx(0.5));
    CHECK(s.vz == doctest::Approx(1.0));
    CHECK(s.omega == doctest::Approx(1.0));
    const auto t = flatness_test(flat);
    CHECK(t.slope == doctest::Approx(0.0));
    CHECK(t.convexity == doctest::Approx(0.0));
    CHECK(t.residual == doctest::Approx(0.0));
    CHECK_FALSE(t.reject);

    const auto one = histogram_stats(RankHistogram{{7, 0, 0, 0}});
    CHECK(one.ez == 0.0);
    CHECK(one.omega == 0.0);
  }

  TEST_CASE("K = 2 hand example") {
    const auto s = histogram_stats(RankHistogram{{1, 1, 0}});
    CHECK(s.ez == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(s.vz == doctest::Approx(0.375).epsilon(1e-15));
  }

  TEST_CASE("sloped and U-shaped histograms are rejected by the right component") {
    std::vector<std::size_t> slope(11), u(11);
    std::size_t total_s = 0, total_u = 0;
    for (std::size_t i = 0; i < 11; ++i) {
      slope[i] = (i + 1) * 10000 / 66;
      u[i] = 600 + 60 * static_cast<std::size_t>((static_cast<int>(i) - 5) * (static_cast<int>(i) - 5));
      total_s += slope[i];
      total_u += u[i];
    }
    const auto ts = flatness_test(RankHistogram{slope});
    CHECK(ts.reject);
    CHECK(ts.p_slope < 0.05 / 3.0);
    const auto tu = flatness_test(RankHistogram{u});
    CHECK(tu.reject);
    CHECK(tu.p_convexity < 0.05 / 3.0);
    CHECK(tu.p_slope > 0.05);
    CHECK(total_s > 9000);
    CHECK(total_u > 9000);
  }

  TEST_CASE("calibrated ranks: statistics close to their targets") {
    Rng rng(31);
    const std::size_t k = 35, n = 1000000;
    std::vector<std::size_t> ranks(n);
    for (auto& r : ranks) r = 1 + uniform_index(rng, k + 1);
    const auto s = histogram_stats(RankHistogram::from_ranks(ranks, k));
    CHECK(std::abs(s.ez - 0.5) < 0.005);
    CHECK(std::abs(s.vz - 1.0) < 0.02);
    CHECK(s.omega > 0.999);
  }
}

TEST_SUITE("roc") {
  TEST_CASE("perfect forecasts") {
    const std::vector<double> p{0, 1, 1, 0, 1};
    const std::vector<char> e{0, 1, 1, 0, 1};
    const auto c = roc_curve(p, e);
    CHECK(c.auc == 1.0);
    CHECK(c.peirce_max == 1.0);
  }

  TEST_CASE("hand 2x2 table") {
    // 10 events, 8 warned; 10 non-events, 3 warned: H = 0.8, F = 0.3
    std::vector<double> p;
    std::vector<char> e;
    for (int i = 0; i < 10; ++i) {
      p.push_back(i < 8 ? 0.9 : 0.1);
      e.push_back(1);
    }
    for (int i = 0; i < 10; ++i) {
      p.push_back(i < 3 ? 0.9 : 0.1);
      e.push_back(0);
    }
    const auto c = roc_curve(p, e, {0.5});
    bool found = false;
    for (const auto& pt : c.points)
      if (pt.threshold == 0.5) {
        CHECK(pt.hit == doctest::Approx(0.8));
        CHECK(pt.false_alarm == doctest::Approx(0.3));
        found = true;
      }
    CHECK(found);
    CHECK(c.peirce_max == doctest::Approx(0.5).epsilon(1e-15));
  }

  TEST_CASE("independent forecasts and monotone curves") {
    Rng rng(41);
    std::vector<double> p(10000);
    std::vector<char> e(10000);
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = uniform01(rng);
      e[i] = uniform01(rng) < 0.3;
    }
    const auto c = roc_curve(p, e);
    CHECK(c.auc >= 0.47);
    CHECK(c.auc <= 0.53);
    for (std::size_t i = 1; i < c.points.size(); ++i) {
      CHECK(c.points[i].hit >= c.points[i - 1].hit);
      CHECK(c.points[i].false_alarm >= c.points[i - 1].false_alarm);
    }
  }

  TEST_CASE("one-class outcomes") {
    const std::vector<double> p{0.2, 0.4};
    const std::vector<char> e{1, 1};
    CHECK_THROWS_AS(roc_curve(p, e), DomainError);
  }
}

TEST_SUITE("report") {
  TEST_CASE("bootstrap interval brackets the mean") {
    std::vector<double> v(500);
    Rng rng(5);
    for (auto& x : v) x = uniform01(rng);
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / 500.0;
    const auto ci = bootstrap_mean_ci(v, 1000, 0.95, 3);
    CHECK(ci.low < mean);
    CHECK(ci.high > mean);
    CHECK(ci.high - ci.low < 0.1);
  }

  TEST_CASE("score report fields and jobs independence") {
    Rng rng(6);
    std::vector<PredictiveDistribution> preds;
    std::vector<double> obs;
    for (int i = 0; i < 400; ++i) {
      const EgpParams p{0.3, 1.0, 1.0 + uniform01(rng), 0.2};
      preds.push_back(p);
      obs.push_back(sample_egp(p, rng));
    }
    ReportConfig cfg;
    cfg.k = 10;
    cfg.bootstrap = 200;
    const auto a = score_predictions("m", preds, obs, cfg, 1.0);
    cfg.jobs = 4;
    const auto b = score_predictions("m", preds, obs, cfg, 1.0);
    CHECK(a.to_json().dump() == b.to_json().dump());
    CHECK(a.histogram.counts.size() == 11);
    CHECK(a.n_cases == 400);
    CHECK(*a.crpss == doctest::Approx(1.0 - a.mean_crps));
    std::ostringstream out;
    const std::vector<ScoreReport> reports{a};
    write_summary_csv(out, reports, cfg);
    const auto header = out.str().substr(0, out.str().find('\n'));
    std::string joined;
    for (const auto& c : summary_columns(cfg)) joined += (joined.empty() ? "" : ",") + c;
    CHECK(header == joined);
  }
}
