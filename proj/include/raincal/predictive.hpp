#pragma once

#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "raincal/distributions.hpp"
#include "raincal/ecdf.hpp"

namespace raincal {

/// A raw or analog ensemble, scored with the fair CRPS.
struct Ensemble {
  std::vector<double> members;
};

/// The output of every calibration method.
using PredictiveDistribution = std::variant<EgpParams, CsgParams, CgevParams, WeightedEcdf, Ensemble>;

/// "egp", "csg", "cgev", "ecdf" or "ensemble".
std::string_view family_name(const PredictiveDistribution& pred);

double predictive_cdf(const PredictiveDistribution& pred, double y);
/// F(y-), the mass strictly below y.
double predictive_cdf_left(const PredictiveDistribution& pred, double y);
double predictive_quantile(const PredictiveDistribution& pred, double prob);

/// (1/K) sum |x_i - y| - 1/(2K(K-1)) sum_ij |x_i - x_j|. Throws for K < 2.
double fair_crps(std::span<const double> members, double y);
/// sum w_i |v_i - y| - 1/2 sum_ij w_i w_j |v_i - v_j|, linear time on sorted values.
double weighted_kernel_crps(const WeightedEcdf& e, double y);

/// Fair CRPS for ensembles, kernel form for ECDFs, closed forms for the parametric families.
double crps_of_predictive(const PredictiveDistribution& pred, double y);

nlohmann::json to_json(const PredictiveDistribution& pred);
PredictiveDistribution predictive_from_json(const nlohmann::json& j);

}  // namespace raincal
