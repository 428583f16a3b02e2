#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "raincal/core.hpp"
#include "raincal/ecdf.hpp"

namespace raincal {

enum class SplitCriterion {
  Cart,      // variance reduction (quantile regression forest)
  Gradient,  // quantile-gradient relabeling (gradient forest)
};

SplitCriterion parse_split_criterion(std::string_view text);
std::string_view to_string(SplitCriterion c);

/// v(D0) - v(D1) - v(D2) with v the within-group sum of squares.
double split_score_cart(std::span<const double> parent, std::span<const double> left, std::span<const double> right);

/// Lower empirical q-quantile: smallest order statistic whose ECDF reaches q.
double lower_quantile(std::span<const double> values, double q);

/// Gradient criterion: rho_i = 1{Y_i > theta_q(parent)} and
/// Delta = sum over children of (sum rho)^2 / |child|. Larger is better.
double split_score_gf(std::span<const double> parent, std::span<const double> left, std::span<const double> right,
                      double q);

struct ForestConfig {
  std::size_t n_trees = 500;
  std::size_t mtry = 0;  // 0 selects ceil(p / 3)
  std::size_t min_node_size = 10;
  double sample_fraction = 1.0;
  bool replace = true;
  SplitCriterion criterion = SplitCriterion::Cart;
  std::vector<double> gf_orders = {0.1, 0.5, 0.9};
  std::uint64_t seed = 1;
  unsigned jobs = 1;  // tree-level parallelism; results do not depend on it
};

struct SplitCandidate {
  std::size_t feature = 0;
  double cut = 0.0;   // rows with x <= cut go left
  double score = 0.0;  // criterion value (H for CART, Delta for GF)
  double gain = 0.0;   // score minus the no-split baseline
};

/// Exhaustive search over midpoints of consecutive distinct values of each
/// listed feature. Ties keep the first candidate in (feature order, cut order).
/// `q` is only used by the gradient criterion.
std::optional<SplitCandidate> best_split(const FeatureMatrix& x, std::span<const double> y,
                                         std::span<const std::size_t> rows, std::span<const std::size_t> features,
                                         SplitCriterion criterion, double q = 0.5);

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double cut = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::int32_t leaf = -1;  // index into Tree::leaves
};

struct Tree {
  std::vector<TreeNode> nodes;                 // nodes[0] is the root
  std::vector<std::vector<std::uint32_t>> leaves;  // bootstrap training indices per leaf

  std::size_t leaf_of(std::span<const double> x) const;
};

class Forest {
 public:
  static Forest grow(const FeatureMatrix& x, std::span<const double> y, const ForestConfig& config);

  /// Weighted ECDF over training responses for the feature row `x`, ordered as predictor_names().
  WeightedEcdf weights(std::span<const double> x) const;
  /// Same, with features supplied by name; throws DataError on a missing predictor.
  WeightedEcdf weights(std::span<const std::string> names, std::span<const double> values) const;
  /// Raw per-training-row weights omega_i(x).
  std::vector<double> training_weights(std::span<const double> x) const;

  /// OOB permutation importance: mean increase of squared error when one
  /// predictor is permuted among each tree's out-of-bag rows.
  std::vector<double> permutation_importance(const FeatureMatrix& x, std::span<const double> y,
                                             std::uint64_t seed) const;

  const std::vector<std::string>& predictor_names() const { return names_; }
  const std::vector<double>& responses() const { return responses_; }
  const std::vector<Tree>& trees() const { return trees_; }
  const ForestConfig& config() const { return config_; }

  nlohmann::json to_json() const;
  static Forest from_json(const nlohmann::json& j);

 private:
  void index_responses();

  ForestConfig config_;
  std::vector<std::string> names_;
  std::vector<double> responses_;
  std::vector<Tree> trees_;
  std::vector<std::uint32_t> rank_;  // rank of each training row by response
};

/// Free-function form of Forest::weights.
inline WeightedEcdf forest_weights(const Forest& f, std::span<const double> x) { return f.weights(x); }

}  // namespace raincal
