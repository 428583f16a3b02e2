#include "raincal/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "raincal/analogs.hpp"
#include "raincal/error.hpp"
#include "raincal/forests.hpp"
#include "raincal/random.hpp"

namespace raincal {

SelectionResult select_predictors(const FeatureMatrix& x, std::span<const double> y, const SelectionConfig& config,
                                  std::string station_id) {
  SelectionResult out;
  out.station_id = std::move(station_id);
  if (config.max_k == 0) return out;
  if (x.cols < 2) throw DataError("selection needs at least two predictors");
  if (x.rows < config.min_rows)
    throw DataError("selection: " + std::to_string(x.rows) + " training rows, need " + std::to_string(config.min_rows));

  ForestConfig fc;
  fc.n_trees = config.n_trees;
  fc.min_node_size = config.min_node_size;
  fc.seed = config.seed;
  const auto forest = Forest::grow(x, y, fc);
  const auto importance = forest.permutation_importance(x, y, derive_seed(config.seed, 0x5e1ec7));
  for (std::size_t j = 0; j < x.cols; ++j) out.importance[x.names[j]] = importance[j];

  std::vector<std::size_t> order(x.cols);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return importance[a] > importance[b]; });

  std::vector<std::vector<double>> kept;
  for (auto j : order) {
    if (out.chosen.size() >= config.max_k || importance[j] <= 0.0) break;
    auto column = x.column(j);
    bool redundant = false;
    for (const auto& k : kept) {
      const double r = pearson_correlation(column, k);
      if (!std::isnan(r) && std::abs(r) > config.redundancy) {
        redundant = true;
        break;
      }
    }
    if (redundant) continue;
    out.chosen.push_back(x.names[j]);
    kept.push_back(std::move(column));
  }
  return out;
}

std::vector<std::pair<std::string, double>> predictor_frequency(std::span<const SelectionResult> results) {
  std::map<std::string, std::size_t> counts;
  for (const auto& r : results)
    for (const auto& name : r.chosen) ++counts[name];
  std::vector<std::pair<std::string, double>> out;
  if (results.empty()) return out;
  for (const auto& [name, c] : counts) out.emplace_back(name, static_cast<double>(c) / static_cast<double>(results.size()));
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

}  // namespace raincal
