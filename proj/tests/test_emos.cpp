#include <doctest.h>

#include <cmath>

#include "raincal/distributions.hpp"
#include "raincal/emos.hpp"
#include "raincal/error.hpp"
#include "raincal/nelder_mead.hpp"
#include "raincal/random.hpp"
#include "raincal/simlab.hpp"
#include "raincal/special.hpp"

using namespace raincal;

namespace {

EmosModel model_of(EmosFamily f, std::vector<double> c, double xi = 0.2) {
  EmosModel m;
  m.family = f;
  m.coefficients = std::move(c);
  m.xi = xi;
  return m;
}

// Large variance relative to the mean gives a skewed gamma, which keeps the
// shift apart from the mean intercept.
const std::vector<double> kCsgTruth{4.0, 1.0, 1.0, 1.0, 6.0, 8.0, 8.0, 2.0};
// Near-symmetric gamma; the objective has a flat intercept/shift ridge but
// the fitted mean link is stable.
const std::vector<double> kCsgMild{1.0, 0.5, 0.3, 0.8, 1.0, 1.0, 1.5, 0.5};

// Independent covariates so every link coefficient is identifiable.
std::vector<EmosCase> csg_sample(std::size_t n, std::uint64_t seed, double scale = 1.0,
                                 const std::vector<double>& coefficients = kCsgTruth, double range = 3.0) {
  Rng rng(seed);
  const auto truth = model_of(EmosFamily::Csg, coefficients);
  std::vector<EmosCase> out(n);
  for (auto& c : out) {
    c.covariates = {range * uniform01(rng), range * uniform01(rng), range * uniform01(rng), uniform01(rng),
                    2.0 * uniform01(rng)};
    const auto p = std::get<CsgParams>(apply_links(truth, c.covariates));
    c.obs = std::max(0.0, gamma_quantile(uniform01(rng), p.kappa, p.theta) - p.delta);
    for (std::size_t j : {kHres, kCtrl, kMean, kMad}) c.covariates[j] *= scale;
    c.obs *= scale;
  }
  return out;
}

}  // namespace

TEST_CASE("family names") {
  CHECK(parse_emos_family("cgev") == EmosFamily::Cgev);
  CHECK(to_string(EmosFamily::Csg) == "csg");
  CHECK_THROWS(parse_emos_family("normal"));
  CHECK(emos_coefficient_count(EmosFamily::Egp) == 9);
}

TEST_CASE("csg link: mean 2, variance 4") {
  // mu = 2 from the intercept, var = 4 from the intercept
  const auto m = model_of(EmosFamily::Csg, {2, 0, 0, 0, 0, 4, 0, 0});
  const std::array<double, 5> x{1, 1, 1, 0.5, 0.3};
  const auto p = std::get<CsgParams>(apply_links(m, x));
  CHECK(p.kappa == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(p.theta == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(p.pi == 0.0);
}

TEST_CASE("egp probability-of-dry link") {
  const auto m = model_of(EmosFamily::Egp, {1, 0, 1, 0, 0, 0, 0, -0.2, 1});
  const std::array<double, 5> x{0, 0, 0, 1.0, 0};
  const auto p = std::get<EgpParams>(apply_links(m, x));
  CHECK(p.pi == doctest::Approx(0.8).epsilon(1e-15));
  const std::array<double, 5> wet{0, 0, 0, 3.0, 0};
  CHECK(std::get<EgpParams>(apply_links(m, wet)).pi == 1.0);
}

TEST_CASE("egp degenerate intercepts hit the kappa floor") {
  const auto m = model_of(EmosFamily::Egp, {1, 0, 0, 0, 0, 0, 0, 0.5, 0});
  const std::array<double, 5> x{1, 1, 1, 1, 1};
  const auto link = evaluate_links(m, x);
  const auto p = std::get<EgpParams>(link.params);
  CHECK(p.pi == 0.5);
  CHECK(p.kappa == m.limits.kappa_floor);
  CHECK(link.violation == 0.0);
}

TEST_CASE("links always return valid parameters") {
  Rng rng(11);
  for (auto f : {EmosFamily::Csg, EmosFamily::Cgev, EmosFamily::Egp}) {
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> c(emos_coefficient_count(f));
      for (auto& v : c) v = 4.0 * (uniform01(rng) - 0.5);
      const auto m = model_of(f, c);
      const std::array<double, 5> x{3 * uniform01(rng), 3 * uniform01(rng), 3 * uniform01(rng), uniform01(rng),
                                    uniform01(rng)};
      const auto p = apply_links(m, x);
      std::visit([](const auto& q) {
        if constexpr (requires { q.validate(); }) CHECK_NOTHROW(q.validate());
      }, p);
      CHECK(std::isfinite(crps_of_predictive(p, 1.0)));
    }
  }
}

TEST_CASE("objective near a point mass is about zero") {
  // CSG with the smallest admissible variance centred on the observation:
  // sd ~1.4e-3, so the score is a few 1e-4 against an observation of 3.
  const auto m = model_of(EmosFamily::Csg, {3.0, 0, 0, 0, 0, 2e-6, 0, 0});
  const std::vector<EmosCase> one{{{0, 0, 0, 0, 0}, 3.0}};
  CHECK(mean_crps_objective(m, one) < 1e-3);
}

TEST_CASE("objective is the mean of per-case scores and penalizes violations") {
  const auto m = model_of(EmosFamily::Cgev, {0.5, 0.2, 0.1, 0.3, 0.4, 0.8, 0.5, 0.1});
  const auto cases = csg_sample(50, 5);
  double sum = 0.0;
  for (const auto& c : cases) sum += crps_of_predictive(apply_links(m, c.covariates), c.obs);
  CHECK(mean_crps_objective(m, cases) == doctest::Approx(sum / 50.0).epsilon(1e-12));
  const auto bad = model_of(EmosFamily::Cgev, {0.5, 0.2, 0.1, 0.3, 0.4, -5.0, 0.0, 0.1});
  CHECK(mean_crps_objective(bad, cases) > 1e6);
}

TEST_CASE("nelder-mead on a quadratic, cap zero, monotone trace") {
  auto f = [](std::span<const double> x) { return (x[0] - 1.0) * (x[0] - 1.0) + 10.0 * (x[1] + 2.0) * (x[1] + 2.0); };
  const auto r = nelder_mead(f, {0.0, 0.0});
  CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(r.x[1] == doctest::Approx(-2.0).epsilon(1e-4));
  for (std::size_t i = 1; i < r.best_trace.size(); ++i) CHECK(r.best_trace[i] <= r.best_trace[i - 1]);
  NelderMeadConfig zero;
  zero.evaluations_per_restart = 0;
  const auto z = nelder_mead(f, {0.3, 0.7}, zero);
  CHECK(z.x == std::vector<double>{0.3, 0.7});
}

TEST_CASE("iteration cap zero returns the start") {
  EmosConfig cfg;
  cfg.optimizer.evaluations_per_restart = 0;
  const auto cases = csg_sample(200, 3);
  const auto m = emos_fit(cases, EmosFamily::Csg, "T", cfg);
  CHECK(m.final_objective == m.start_objective);
}

TEST_CASE("too few cases") {
  CHECK_THROWS_AS(emos_fit(csg_sample(10, 1), EmosFamily::Csg, "T"), DataError);
}

TEST_CASE("fit does not depend on training order") {
  auto cases = csg_sample(300, 9);
  EmosConfig cfg;
  cfg.optimizer.restarts = 2;
  const auto a = emos_fit(cases, EmosFamily::Egp, "T", cfg);
  std::reverse(cases.begin(), cases.end());
  const auto b = emos_fit(cases, EmosFamily::Egp, "T", cfg);
  CHECK(a.coefficients == b.coefficients);
}

TEST_CASE("csg refit recovers the generating link model") {
  const auto train = csg_sample(5000, 21);
  const auto valid = csg_sample(5000, 22);
  const auto m = emos_fit(train, EmosFamily::Csg, "T");
  for (std::size_t i = 0; i < kCsgTruth.size(); ++i) {
    INFO("coefficient " << emos_coefficient_names(EmosFamily::Csg)[i]);
    CHECK(std::abs(m.coefficients[i] - kCsgTruth[i]) <= 0.1 * std::abs(kCsgTruth[i]));
  }
  const double truth = mean_crps_objective(model_of(EmosFamily::Csg, kCsgTruth), valid);
  CHECK(mean_crps_objective(m, valid) <= 1.02 * truth);
}

TEST_CASE("doubling all rainfall doubles the fitted mean link") {
  const auto base = csg_sample(3000, 31, 1.0, kCsgMild, 5.0);
  const auto doubled = csg_sample(3000, 31, 2.0, kCsgMild, 5.0);
  EmosConfig cfg;
  cfg.optimizer.restarts = 5;
  const auto a = emos_fit(base, EmosFamily::Csg, "T", cfg);
  const auto b = emos_fit(doubled, EmosFamily::Csg, "T", cfg);
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    const auto pa = std::get<CsgParams>(apply_links(a, base[i].covariates));
    const auto pb = std::get<CsgParams>(apply_links(b, doubled[i].covariates));
    mean_a += pa.kappa * pa.theta;
    mean_b += pb.kappa * pb.theta;
  }
  CHECK(mean_b / mean_a == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("station xi climatology") {
  Rng rng(5);
  std::vector<double> obs(100000);
  for (auto& y : obs) y = sample_egp({0.0, 1.0, 1.0, 0.3}, rng);
  const auto e = station_xi_climatology(obs);
  CHECK_FALSE(e.defaulted);
  CHECK(e.xi >= 0.25);
  CHECK(e.xi <= 0.35);

  const std::vector<double> dry(500, 0.0);
  const auto d = station_xi_climatology(dry);
  CHECK(d.defaulted);
  CHECK(d.xi == 0.2);
  CHECK_FALSE(d.warning.empty());

  // Shape 0.9 has an infinite second moment but finite PWMs; the estimate is clamped.
  for (auto& y : obs) y = sample_egp({0.0, 1.0, 1.0, 0.9}, rng);
  CHECK(station_xi_climatology(obs).xi == 0.7);
}

TEST_CASE("model json round trip") {
  const auto m = emos_fit(csg_sample(200, 4), EmosFamily::Cgev, "S9");
  const auto back = EmosModel::from_json(nlohmann::json::parse(m.to_json().dump()));
  CHECK(back.coefficients == m.coefficients);
  CHECK(back.family == EmosFamily::Cgev);
  CHECK(back.station_id == "S9");
}
