#include "raincal/ecdf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "raincal/error.hpp"

namespace raincal {

WeightedEcdf WeightedEcdf::from_weighted(std::span<const double> values, std::span<const double> weights) {
  if (values.size() != weights.size() || values.empty())
    throw DomainError("weighted ECDF needs equal-length, non-empty values and weights");
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });

  WeightedEcdf e;
  double total = 0.0;
  for (auto i : order) {
    if (weights[i] < 0.0 || !std::isfinite(weights[i])) throw DomainError("weighted ECDF: invalid weight");
    if (weights[i] == 0.0) continue;
    if (!e.values.empty() && e.values.back() == values[i]) {
      e.weights.back() += weights[i];
    } else {
      e.values.push_back(values[i]);
      e.weights.push_back(weights[i]);
    }
    total += weights[i];
  }
  if (!(total > 0.0)) throw DomainError("weighted ECDF: weights sum to zero");
  for (auto& w : e.weights) w /= total;
  return e;
}

WeightedEcdf WeightedEcdf::uniform(std::span<const double> values) {
  std::vector<double> w(values.size(), 1.0);
  return from_weighted(values, w);
}

double WeightedEcdf::cdf(double y) const {
  double c = 0.0;
  for (std::size_t i = 0; i < values.size() && values[i] <= y; ++i) c += weights[i];
  return std::min(c, 1.0);
}

double WeightedEcdf::cdf_left(double y) const {
  double c = 0.0;
  for (std::size_t i = 0; i < values.size() && values[i] < y; ++i) c += weights[i];
  return std::min(c, 1.0);
}

void WeightedEcdf::validate() const {
  if (values.empty() || values.size() != weights.size()) throw DomainError("weighted ECDF: malformed arrays");
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (weights[i] < 0.0) throw DomainError("weighted ECDF: negative weight");
    if (i > 0 && !(values[i] > values[i - 1])) throw DomainError("weighted ECDF: values not strictly ascending");
    total += weights[i];
  }
  if (std::abs(total - 1.0) > 1e-9) throw DomainError("weighted ECDF: weights do not sum to 1");
}

double ecdf_quantile(const WeightedEcdf& e, double prob) {
  if (e.values.empty()) throw DomainError("quantile of an empty ECDF");
  double cumulative = 0.0;
  for (std::size_t i = 0; i < e.values.size(); ++i) {
    cumulative += e.weights[i];
    if (cumulative >= prob - 1e-12) return e.values[i];
  }
  return e.values.back();
}

}  // namespace raincal
