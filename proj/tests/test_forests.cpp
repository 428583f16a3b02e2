#include <doctest.h>

#include <cmath>
#include <numeric>

#include "raincal/error.hpp"
#include "raincal/forests.hpp"
#include "raincal/random.hpp"

using namespace raincal;

namespace {

FeatureMatrix matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  FeatureMatrix m;
  m.rows = rows;
  m.cols = cols;
  for (std::size_t j = 0; j < cols; ++j) m.names.push_back("x" + std::to_string(j));
  m.values = std::move(values);
  return m;
}

// Forest over responses y1, y2 with two single-split trees; x = 0 routes to
// leaf {y1} in the first tree and to {y1, y2} in the second.
nlohmann::json two_tree_forest() {
  nlohmann::json leafy = {{"feature", {0, -1, -1}}, {"cut", {0.5, 0.0, 0.0}}, {"left", {1, -1, -1}},
                          {"right", {2, -1, -1}},  {"leaf", {-1, 0, 1}},     {"leaves", {{0}, {1}}}};
  nlohmann::json merged = {{"feature", {0, -1, -1}}, {"cut", {0.5, 0.0, 0.0}}, {"left", {1, -1, -1}},
                           {"right", {2, -1, -1}},  {"leaf", {-1, 0, 1}},     {"leaves", {{0, 1}, {1}}}};
  return {{"format", "raincal-forest"},
          {"version", 1},
          {"criterion", "cart"},
          {"config",
           {{"n_trees", 2}, {"mtry", 1}, {"min_node_size", 1}, {"sample_fraction", 1.0}, {"replace", true},
            {"gf_orders", {0.5}}, {"seed", 1}}},
          {"predictors", {"x0"}},
          {"responses", {3.0, 7.0}},
          {"trees", {leafy, merged}}};
}

}  // namespace

TEST_CASE("cart score examples") {
  const std::vector<double> parent{0, 0, 10, 10}, l{0, 0}, r{10, 10};
  CHECK(split_score_cart(parent, l, r) == doctest::Approx(100.0).epsilon(1e-15));
  const std::vector<double> flat{2, 2, 2, 2}, fl{2}, fr{2, 2, 2};
  CHECK(split_score_cart(flat, fl, fr) == 0.0);
}

TEST_CASE("gradient score example") {
  const std::vector<double> parent{1, 2, 3, 4}, l{1, 2}, r{3, 4};
  CHECK(lower_quantile(parent, 0.5) == 2.0);
  CHECK(split_score_gf(parent, l, r, 0.5) == doctest::Approx(2.0).epsilon(1e-15));
  // One exceedance per child: Delta equals the unsplit (sum rho)^2 / n = 1.
  const std::vector<double> bl{1, 3}, br{2, 4};
  CHECK(split_score_gf(parent, bl, br, 0.5) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("split criterion names") {
  CHECK(parse_split_criterion("gf") == SplitCriterion::Gradient);
  CHECK(parse_split_criterion("cart") == SplitCriterion::Cart);
  CHECK_THROWS(parse_split_criterion("oblique"));
}

TEST_CASE("single leaf forest returns the bootstrap sample uniformly") {
  const auto x = matrix(4, 1, {0.1, 0.2, 0.3, 0.4});
  const std::vector<double> y{1, 2, 3, 4};
  ForestConfig c;
  c.n_trees = 1;
  c.min_node_size = 4;
  c.replace = false;
  const auto f = Forest::grow(x, y, c);
  REQUIRE(f.trees()[0].nodes.size() == 1);
  const auto w = f.training_weights(std::vector<double>{0.25});
  for (double v : w) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("constant responses grow single-leaf trees") {
  std::vector<double> xs(30);
  std::iota(xs.begin(), xs.end(), 0.0);
  const auto x2 = matrix(30, 1, xs);
  const std::vector<double> y(30, 1.5);
  ForestConfig c;
  c.n_trees = 5;
  c.min_node_size = 2;
  const auto f = Forest::grow(x2, y, c);
  for (const auto& t : f.trees()) CHECK(t.nodes.size() == 1);
}

TEST_CASE("hand accumulated weights") {
  const auto f = Forest::from_json(two_tree_forest());
  const auto w = f.training_weights(std::vector<double>{0.0});
  CHECK(w[0] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(w[1] == doctest::Approx(0.25).epsilon(1e-15));
  const auto e = f.weights(std::vector<double>{0.0});
  CHECK(e.values == std::vector<double>{3.0, 7.0});
  CHECK(e.cdf(3.0) == doctest::Approx(0.75));
}

TEST_CASE("same seed, same forest; serialization round trip") {
  Rng rng(3);
  const std::size_t n = 200;
  std::vector<double> xv(n * 3), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < 3; ++j) xv[i * 3 + j] = uniform01(rng);
    y[i] = std::max(0.0, xv[i * 3] * 4.0 - 1.0 + standard_normal(rng));
  }
  const auto x = matrix(n, 3, xv);
  ForestConfig c;
  c.n_trees = 20;
  c.criterion = SplitCriterion::Gradient;
  const auto a = Forest::grow(x, y, c);
  c.jobs = 3;
  const auto b = Forest::grow(x, y, c);
  CHECK(a.to_json() == b.to_json());
  const auto back = Forest::from_json(nlohmann::json::parse(a.to_json().dump()));
  const std::vector<double> q{0.3, 0.6, 0.9};
  CHECK(back.training_weights(q) == a.training_weights(q));
}

TEST_CASE("weights by name reorder and reject missing predictors") {
  const auto f = Forest::from_json(two_tree_forest());
  const std::vector<std::string> names{"other", "x0"};
  const std::vector<double> vals{9.0, 0.0};
  CHECK(f.weights(names, vals).values.size() == 2);
  const std::vector<std::string> bad{"other"};
  const std::vector<double> badv{0.0};
  CHECK_THROWS_AS(f.weights(bad, badv), DataError);
}

TEST_CASE("malformed forest files") {
  auto j = two_tree_forest();
  j["version"] = 2;
  CHECK_THROWS_AS(Forest::from_json(j), DataError);
  j = two_tree_forest();
  j["format"] = "something";
  CHECK_THROWS_AS(Forest::from_json(j), DataError);
}
