#include <doctest.h>

#include <cmath>

#include "raincal/analogs.hpp"
#include "raincal/error.hpp"
#include "raincal/random.hpp"
#include "raincal/selection.hpp"

using namespace raincal;

namespace {

// One station, daily cases, HRES taken from `hres`, observation = 10 * day index.
Dataset archive_data(const std::vector<double>& hres) {
  Dataset d;
  const auto t0 = parse_timestamp("2014-03-01T18:00:00Z");
  for (std::size_t i = 0; i < hres.size(); ++i) {
    Case c;
    c.forecast.station_id = "A";
    c.forecast.valid_time = t0 + std::chrono::days(static_cast<long long>(i));
    c.forecast.members = {0.0, 1.0};
    c.forecast.aux["HRES"] = hres[i];
    c.observation = 10.0 * static_cast<double>(i);
    d.cases.push_back(c);
  }
  return d;
}

std::vector<std::size_t> iota_n(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace

TEST_CASE("distance examples") {
  const std::vector<double> a{1.0, 2.0}, w{1.0, 1.0}, s{1.0, 1.0};
  CHECK(analog_distance(a, a, 1, w, s) == 0.0);
  const std::vector<double> f{3.0}, g{1.0}, w1{1.0}, s1{1.0};
  CHECK(analog_distance(f, g, 1, w1, s1) == 2.0);
  const std::vector<double> q{3.0, 8.0}, c{0.0, 0.0}, w2{1.0, 2.0}, s2{1.0, 4.0};
  CHECK(analog_distance(q, c, 1, w2, s2) == doctest::Approx(7.0).epsilon(1e-15));
  // window of three offsets: Euclidean norm within each predictor block
  const std::vector<double> q3{1.0, 2.0, 2.0}, c3{0.0, 0.0, 0.0}, w3{1.0}, s3{1.0};
  CHECK(analog_distance(q3, c3, 3, w3, s3) == doctest::Approx(3.0).epsilon(1e-15));
  const std::vector<double> nan{std::nan("")};
  CHECK_THROWS_AS(analog_distance(nan, g, 1, w1, s1), DataError);
}

TEST_CASE("hand sorted five-case archive") {
  // HRES on the query day (index 0) is 5; distances with t_tilde = 0 are |5 - h|.
  const auto d = archive_data({5.0, 9.0, 4.0, 5.0, 7.0, 1.0});
  const AnalogArchive ar(d, iota_n(d.cases.size()), PredictorSet::custom({"HRES"}));
  AnalogConfig cfg;
  cfg.weights = {1.0};
  cfg.sigma = {1.0};
  cfg.t_tilde = 0;
  cfg.n_analogs = 5;
  const auto candidates = iota_n(d.cases.size());
  const auto m = find_analogs(ar, 0, candidates, cfg);
  REQUIRE(m.size() == 5);
  // expected order: day 3 (0), day 2 (1), day 4 (2), day 1 (4), day 5 (4, later)
  const std::vector<double> obs{30.0, 20.0, 40.0, 10.0, 50.0};
  for (std::size_t i = 0; i < 5; ++i) CHECK(m[i].observation == obs[i]);
  CHECK(m[0].distance == 0.0);
  cfg.n_analogs = 6;
  CHECK_THROWS_AS(find_analogs(ar, 0, candidates, cfg), DataError);
}

TEST_CASE("window uses neighbouring days") {
  const auto d = archive_data({0.0, 1.0, 0.0, 5.0, 1.0, 5.0, 0.0, 1.0, 0.0});
  const AnalogArchive ar(d, iota_n(d.cases.size()), PredictorSet::custom({"HRES"}));
  AnalogConfig cfg;
  cfg.weights = {1.0};
  cfg.sigma = {1.0};
  cfg.t_tilde = 1;
  cfg.n_analogs = 1;
  // Query day 7 (0, 1, 0 around it) matches day 1 exactly.
  const auto m = find_analogs(ar, 7, iota_n(d.cases.size()), cfg);
  CHECK(m[0].observation == 10.0);
}

TEST_CASE("weighting modes") {
  FeatureMatrix x;
  x.names = {"HRES", "CTRL", "MEAN", "PR0"};
  x.rows = 3;
  x.cols = 4;
  x.values = {1, 5, 2, 0.5, 2, 5, 1, 0.5, 3, 5, 7, 0.5};
  const std::vector<double> obs{1, 2, 3};
  CHECK(make_weighting(AnalogWeighting::Uniform, x, obs).weights == std::vector<double>{1, 1, 1, 1});
  const auto c = make_weighting(AnalogWeighting::Correlation, x, obs);
  CHECK(c.weights[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(c.weights[1] == 0.0);
  CHECK(c.warnings.size() == 2);
  const auto v = make_weighting(AnalogWeighting::Vsf, x, obs, {{"HRES", 0.5}, {"MEAN", 1.5}});
  CHECK(v.weights == std::vector<double>{0.25, 0.0, 0.75, 0.0});
}

TEST_CASE("correlation with independent noise is small") {
  Rng rng(17);
  std::vector<double> a(10000), b(10000);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = standard_normal(rng);
    b[i] = standard_normal(rng);
  }
  CHECK(std::abs(pearson_correlation(a, b)) < 0.05);
}

TEST_CASE("selection ranks the signal predictor first") {
  Rng rng(2);
  FeatureMatrix x;
  x.names = {"CAPE", "TCC", "HRES", "UX"};
  x.rows = 600;
  x.cols = 4;
  std::vector<double> y(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t j = 0; j < 4; ++j) x.values.push_back(uniform01(rng));
    y[i] = 5.0 * x.values[i * 4 + 2] + 0.1 * standard_normal(rng);
  }
  SelectionConfig cfg;
  cfg.n_trees = 100;
  const auto r = select_predictors(x, y, cfg, "A");
  REQUIRE_FALSE(r.chosen.empty());
  CHECK(r.chosen.front() == "HRES");
  CHECK(r.chosen.size() <= 4);
  cfg.max_k = 0;
  CHECK(select_predictors(x, y, cfg).chosen.empty());
}

TEST_CASE("redundant copies are not both chosen") {
  Rng rng(4);
  FeatureMatrix x;
  x.names = {"HRES", "CTRL", "CAPE"};
  x.rows = 500;
  x.cols = 3;
  std::vector<double> y(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double s = uniform01(rng);
    x.values.insert(x.values.end(), {s, s, uniform01(rng)});
    y[i] = 3.0 * s + 0.2 * standard_normal(rng);
  }
  SelectionConfig cfg;
  cfg.n_trees = 100;
  const auto r = select_predictors(x, y, cfg);
  const bool both = std::count(r.chosen.begin(), r.chosen.end(), "HRES") + std::count(r.chosen.begin(), r.chosen.end(), "CTRL") == 2;
  CHECK_FALSE(both);
}

TEST_CASE("selection frequency") {
  SelectionResult a{"S1", {"MEAN", "CAPE"}, {}};
  SelectionResult b{"S2", {"MEAN"}, {}};
  const std::vector<SelectionResult> both{a, b};
  const auto f = predictor_frequency(both);
  REQUIRE(f.size() == 2);
  CHECK(f[0] == std::pair<std::string, double>{"MEAN", 1.0});
  CHECK(f[1] == std::pair<std::string, double>{"CAPE", 0.5});
}
