#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "raincal/core.hpp"

namespace raincal {

struct SelectionConfig {
  std::size_t max_k = 4;
  double redundancy = 0.9;  // skip predictors with |r| above this against a chosen one
  std::size_t min_rows = 200;
  std::size_t n_trees = 200;
  std::size_t min_node_size = 10;
  std::uint64_t seed = 1;
};

struct SelectionResult {
  std::string station_id;
  std::vector<std::string> chosen;
  std::map<std::string, double> importance;
};

/// Approximation of forest-based variable selection: rank predictors by OOB
/// permutation importance of a CART forest, then walk the ranking and keep a
/// predictor unless it is redundant with one already kept; stop at max_k or at
/// the first non-positive importance.
SelectionResult select_predictors(const FeatureMatrix& x, std::span<const double> y, const SelectionConfig& config,
                                  std::string station_id = {});

/// Fraction of results choosing each predictor, sorted by decreasing fraction
/// (ties by name). Predictors never chosen are absent.
std::vector<std::pair<std::string, double>> predictor_frequency(std::span<const SelectionResult> results);

}  // namespace raincal
