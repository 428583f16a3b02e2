#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "raincal/core.hpp"
#include "raincal/nelder_mead.hpp"
#include "raincal/predictive.hpp"

namespace raincal {

enum class EmosFamily { Csg, Cgev, Egp };

EmosFamily parse_emos_family(std::string_view text);
std::string_view to_string(EmosFamily f);

/// Link covariates, always in this order.
inline constexpr std::array<std::string_view, 5> kEmosCovariates = {"HRES", "CTRL", "MEAN", "PR0", "MAD"};
enum EmosCovariate : std::size_t { kHres = 0, kCtrl, kMean, kPr0, kMad };

/// Coefficient layout (natural units):
///   csg:  mu = c0 + c1 HRES + c2 CTRL + c3 MEAN + c4 PR0; var = c5 + c6 MEAN; delta = c7
///   cgev: loc = c0 + c1 HRES + c2 CTRL + c3 MEAN + c4 PR0; sigma = c5 + c6 MAD; xi = c7
///   egp:  sigma = c0 + c1 MAD; mu = max(0, c2 + c3 HRES + c4 CTRL + c5 MEAN + c6 PR0);
///         kappa = mu / sigma; pi = clamp(c7 + c8 PR0, 0, 1); xi fixed
std::size_t emos_coefficient_count(EmosFamily f);
const std::vector<std::string>& emos_coefficient_names(EmosFamily f);

struct EmosLimits {
  double kappa_floor = 1e-3;
  double sigma_floor = 1e-6;  // also the floor for the CSG mean and variance
  double xi_min = -0.5;       // CGEV shape range
  double xi_max = 0.95;
};

struct EmosModel {
  std::string station_id;
  EmosFamily family = EmosFamily::Egp;
  std::vector<double> coefficients;
  double xi = 0.2;  // EGP only
  EmosLimits limits;
  std::size_t evaluations = 0;
  double start_objective = 0.0;
  double final_objective = 0.0;

  nlohmann::json to_json() const;
  static EmosModel from_json(const nlohmann::json& j);
};

struct LinkOutput {
  PredictiveDistribution params;
  double violation = 0.0;  // distance of the raw link values outside the parameter domain
};

/// Raw link evaluation; `params` already has floors and clamps applied.
LinkOutput evaluate_links(const EmosModel& m, std::span<const double> covariates);
/// Always returns valid parameters for the model's family.
PredictiveDistribution apply_links(const EmosModel& m, std::span<const double> covariates);

struct EmosCase {
  std::array<double, 5> covariates{};
  double obs = 0.0;
};

/// Labeled cases among `indices`, covariates derived from each forecast.
std::vector<EmosCase> emos_cases(const Dataset& data, std::span<const std::size_t> indices);
std::array<double, 5> emos_covariates(const ForecastRecord& record);

/// Mean CRPS over the cases; a domain violation anywhere returns 1e6 plus the
/// mean violation, which exceeds every feasible objective.
double mean_crps_objective(const EmosModel& m, std::span<const EmosCase> cases);

struct XiConfig {
  std::size_t min_positives = 100;
  double dry_threshold = 0.05;
  double fallback = 0.2;
  double lower = 0.01;
  double upper = 0.7;
};

struct XiEstimate {
  double xi = 0.2;
  bool defaulted = false;
  std::string warning;
};

/// PWM fit of an EGP to the wet climatology, shape clamped to [lower, upper].
XiEstimate station_xi_climatology(std::span<const double> observations, const XiConfig& config = {});

struct EmosConfig {
  std::size_t min_cases = 50;
  NelderMeadConfig optimizer;
  EmosLimits limits;
  XiConfig xi;
  std::optional<double> egp_xi;  // overrides the climatological estimate
  double delta_start = 0.5;      // CSG shift start (mm)
};

/// CRPS-minimizing fit from a climatological start. Training cases are put in
/// a canonical order first, so the result does not depend on their order.
EmosModel emos_fit(std::span<const EmosCase> train, EmosFamily family, std::string station_id,
                   const EmosConfig& config = {});

}  // namespace raincal
