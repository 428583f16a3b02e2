#pragma once

#include <span>
#include <vector>

namespace raincal {

/// Weighted empirical CDF F(y) = sum_i w_i 1{v_i <= y}. Values are sorted
/// ascending and distinct; weights are non-negative and sum to one.
struct WeightedEcdf {
  std::vector<double> values;
  std::vector<double> weights;

  /// Sorts, merges equal values, drops zero weights and renormalizes.
  static WeightedEcdf from_weighted(std::span<const double> values, std::span<const double> weights);
  static WeightedEcdf uniform(std::span<const double> values);

  std::size_t size() const { return values.size(); }
  double cdf(double y) const;
  /// F(y-), the mass strictly below y.
  double cdf_left(double y) const;
  double max_value() const { return values.back(); }

  /// Throws DomainError unless the invariants hold within 1e-9.
  void validate() const;
};

/// Smallest value whose cumulative weight reaches `prob` (generalized inverse).
double ecdf_quantile(const WeightedEcdf& e, double prob);

}  // namespace raincal
