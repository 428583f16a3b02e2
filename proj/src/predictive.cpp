#include "raincal/predictive.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "raincal/error.hpp"

namespace raincal {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

WeightedEcdf ensemble_ecdf(const Ensemble& e) { return WeightedEcdf::uniform(e.members); }

}  // namespace

std::string_view family_name(const PredictiveDistribution& pred) {
  return std::visit(overloaded{[](const EgpParams&) { return std::string_view("egp"); },
                               [](const CsgParams&) { return std::string_view("csg"); },
                               [](const CgevParams&) { return std::string_view("cgev"); },
                               [](const WeightedEcdf&) { return std::string_view("ecdf"); },
                               [](const Ensemble&) { return std::string_view("ensemble"); }},
                    pred);
}

double predictive_cdf(const PredictiveDistribution& pred, double y) {
  return std::visit(overloaded{[y](const EgpParams& p) { return y < 0.0 ? 0.0 : egp_cdf(y, p); },
                               [y](const CsgParams& p) { return y < 0.0 ? 0.0 : csg_cdf(y, p); },
                               [y](const CgevParams& p) { return y < 0.0 ? 0.0 : cgev_cdf(y, p); },
                               [y](const WeightedEcdf& e) { return e.cdf(y); },
                               [y](const Ensemble& e) { return ensemble_ecdf(e).cdf(y); }},
                    pred);
}

double predictive_cdf_left(const PredictiveDistribution& pred, double y) {
  return std::visit(overloaded{[y](const EgpParams& p) { return y <= 0.0 ? 0.0 : egp_cdf(y, p); },
                               [y](const CsgParams& p) { return y <= 0.0 ? 0.0 : csg_cdf(y, p); },
                               [y](const CgevParams& p) { return y <= 0.0 ? 0.0 : cgev_cdf(y, p); },
                               [y](const WeightedEcdf& e) { return e.cdf_left(y); },
                               [y](const Ensemble& e) { return ensemble_ecdf(e).cdf_left(y); }},
                    pred);
}

double predictive_quantile(const PredictiveDistribution& pred, double prob) {
  return std::visit(overloaded{[prob](const EgpParams& p) { return egp_quantile(prob, p); },
                               [prob](const CsgParams& p) { return csg_quantile(prob, p); },
                               [prob](const CgevParams& p) { return cgev_quantile(prob, p); },
                               [prob](const WeightedEcdf& e) { return ecdf_quantile(e, prob); },
                               [prob](const Ensemble& e) { return ecdf_quantile(ensemble_ecdf(e), prob); }},
                    pred);
}

double fair_crps(std::span<const double> members, double y) {
  const auto k = members.size();
  if (k < 2) throw DomainError("fair CRPS needs at least two members");
  std::vector<double> x(members.begin(), members.end());
  std::sort(x.begin(), x.end());
  double abs_obs = 0.0;
  double spread = 0.0;  // sum over ordered pairs i != j of |x_i - x_j|
  for (std::size_t i = 0; i < k; ++i) {
    abs_obs += std::abs(x[i] - y);
    spread += 2.0 * x[i] * (2.0 * static_cast<double>(i) - static_cast<double>(k) + 1.0);
  }
  const auto kd = static_cast<double>(k);
  return abs_obs / kd - spread / (2.0 * kd * (kd - 1.0));
}

double weighted_kernel_crps(const WeightedEcdf& e, double y) {
  double abs_obs = 0.0;
  double spread = 0.0;
  double below = 0.0;
  for (std::size_t i = 0; i < e.values.size(); ++i) {
    const double w = e.weights[i];
    const double above = std::max(0.0, 1.0 - below - w);
    abs_obs += w * std::abs(e.values[i] - y);
    spread += 2.0 * w * e.values[i] * (below - above);
    below += w;
  }
  return abs_obs - 0.5 * spread;
}

double crps_of_predictive(const PredictiveDistribution& pred, double y) {
  return std::visit(overloaded{[y](const EgpParams& p) { return egp_crps(p, y); },
                               [y](const CsgParams& p) { return csg_crps(p, y); },
                               [y](const CgevParams& p) { return cgev_crps(p, y); },
                               [y](const WeightedEcdf& e) { return weighted_kernel_crps(e, y); },
                               [y](const Ensemble& e) { return fair_crps(e.members, y); }},
                    pred);
}

nlohmann::json to_json(const PredictiveDistribution& pred) {
  return std::visit(
      overloaded{
          [](const EgpParams& p) -> nlohmann::json {
            return {{"family", "egp"}, {"pi", p.pi}, {"kappa", p.kappa}, {"sigma", p.sigma}, {"xi", p.xi}};
          },
          [](const CsgParams& p) -> nlohmann::json {
            return {{"family", "csg"}, {"pi", p.pi}, {"delta", p.delta}, {"kappa", p.kappa}, {"theta", p.theta}};
          },
          [](const CgevParams& p) -> nlohmann::json {
            return {{"family", "cgev"}, {"pi", p.pi}, {"mu", p.mu}, {"sigma", p.sigma}, {"xi", p.xi}};
          },
          [](const WeightedEcdf& e) -> nlohmann::json {
            return {{"family", "ecdf"}, {"values", e.values}, {"weights", e.weights}};
          },
          [](const Ensemble& e) -> nlohmann::json { return {{"family", "ensemble"}, {"members", e.members}}; }},
      pred);
}

PredictiveDistribution predictive_from_json(const nlohmann::json& j) {
  const auto family = j.at("family").get<std::string>();
  if (family == "egp") return EgpParams{j.at("pi"), j.at("kappa"), j.at("sigma"), j.at("xi")};
  if (family == "csg") return CsgParams{j.at("pi"), j.at("delta"), j.at("kappa"), j.at("theta")};
  if (family == "cgev") return CgevParams{j.at("pi"), j.at("mu"), j.at("sigma"), j.at("xi")};
  if (family == "ecdf") {
    WeightedEcdf e{j.at("values").get<std::vector<double>>(), j.at("weights").get<std::vector<double>>()};
    e.validate();
    return e;
  }
  if (family == "ensemble") return Ensemble{j.at("members").get<std::vector<double>>()};
  throw DataError("unknown predictive family '" + family + "'");
}

}  // namespace raincal
