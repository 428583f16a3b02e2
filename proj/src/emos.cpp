#include "raincal/emos.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "raincal/error.hpp"

namespace raincal {

EmosFamily parse_emos_family(std::string_view text) {
  if (text == "csg") return EmosFamily::Csg;
  if (text == "cgev") return EmosFamily::Cgev;
  if (text == "egp") return EmosFamily::Egp;
  throw DomainError("unknown EMOS family '" + std::string(text) + "'");
}

std::string_view to_string(EmosFamily f) {
  switch (f) {
    case EmosFamily::Csg: return "csg";
    case EmosFamily::Cgev: return "cgev";
    case EmosFamily::Egp: return "egp";
  }
  return "?";
}

namespace {

// A linked output: intercept plus slopes on some covariates, expressed in
// units of rainfall^power during fitting.
struct LinkGroup {
  int power;
  std::vector<std::size_t> covariates;
};

const std::vector<LinkGroup>& link_groups(EmosFamily f) {
  static const std::vector<LinkGroup> csg = {{1, {kHres, kCtrl, kMean, kPr0}}, {2, {kMean}}, {1, {}}};
  static const std::vector<LinkGroup> cgev = {{1, {kHres, kCtrl, kMean, kPr0}}, {1, {kMad}}, {0, {}}};
  static const std::vector<LinkGroup> egp = {{1, {kMad}}, {1, {kHres, kCtrl, kMean, kPr0}}, {0, {kPr0}}};
  switch (f) {
    case EmosFamily::Csg: return csg;
    case EmosFamily::Cgev: return cgev;
    case EmosFamily::Egp: return egp;
  }
  return egp;
}

double below(double value, double floor) { return value < floor ? floor - value : 0.0; }

}  // namespace

std::size_t emos_coefficient_count(EmosFamily f) {
  std::size_t n = 0;
  for (const auto& g : link_groups(f)) n += 1 + g.covariates.size();
  return n;
}

const std::vector<std::string>& emos_coefficient_names(EmosFamily f) {
  static const std::vector<std::string> csg = {"mu_0", "mu_HRES", "mu_CTRL", "mu_MEAN",
                                               "mu_PR0", "var_0", "var_MEAN", "delta"};
  static const std::vector<std::string> cgev = {"loc_0", "loc_HRES", "loc_CTRL", "loc_MEAN",
                                                "loc_PR0", "sigma_0", "sigma_MAD", "xi"};
  static const std::vector<std::string> egp = {"sigma_0", "sigma_MAD", "mu_0",  "mu_HRES", "mu_CTRL",
                                               "mu_MEAN", "mu_PR0",    "pi_0", "pi_PR0"};
  switch (f) {
    case EmosFamily::Csg: return csg;
    case EmosFamily::Cgev: return cgev;
    case EmosFamily::Egp: return egp;
  }
  return egp;
}

LinkOutput evaluate_links(const EmosModel& m, std::span<const double> x) {
  if (x.size() != kEmosCovariates.size()) throw DataError("EMOS: expected 5 covariates (HRES, CTRL, MEAN, PR0, MAD)");
  if (m.coefficients.size() != emos_coefficient_count(m.family)) throw DomainError("EMOS: wrong coefficient count");
  for (double v : x)
    if (!std::isfinite(v)) throw DataError("EMOS: non-finite covariate");
  const auto& c = m.coefficients;
  const auto& lim = m.limits;
  LinkOutput out;
  switch (m.family) {
    case EmosFamily::Csg: {
      const double mu = c[0] + c[1] * x[kHres] + c[2] * x[kCtrl] + c[3] * x[kMean] + c[4] * x[kPr0];
      const double var = c[5] + c[6] * x[kMean];
      out.violation = below(mu, lim.sigma_floor) + below(var, lim.sigma_floor) + below(c[7], 0.0);
      const double mu_f = std::max(mu, lim.sigma_floor);
      const double var_f = std::max(var, lim.sigma_floor);
      out.params = CsgParams::censored(std::max(c[7], 0.0), mu_f * mu_f / var_f, var_f / mu_f);
      break;
    }
    case EmosFamily::Cgev: {
      const double loc = c[0] + c[1] * x[kHres] + c[2] * x[kCtrl] + c[3] * x[kMean] + c[4] * x[kPr0];
      const double sigma = c[5] + c[6] * x[kMad];
      out.violation = below(sigma, lim.sigma_floor) + below(c[7], lim.xi_min) + below(-c[7], -lim.xi_max);
      out.params = CgevParams::censored(loc, std::max(sigma, lim.sigma_floor), std::clamp(c[7], lim.xi_min, lim.xi_max));
      break;
    }
    case EmosFamily::Egp: {
      const double sigma = c[0] + c[1] * x[kMad];
      const double mu = std::max(0.0, c[2] + c[3] * x[kHres] + c[4] * x[kCtrl] + c[5] * x[kMean] + c[6] * x[kPr0]);
      const double pi = std::clamp(c[7] + c[8] * x[kPr0], 0.0, 1.0);
      out.violation = below(sigma, lim.sigma_floor);
      const double sigma_f = std::max(sigma, lim.sigma_floor);
      out.params = EgpParams{pi, std::max(mu / sigma_f, lim.kappa_floor), sigma_f, m.xi};
      break;
    }
  }
  return out;
}

PredictiveDistribution apply_links(const EmosModel& m, std::span<const double> covariates) {
  return evaluate_links(m, covariates).params;
}

std::array<double, 5> emos_covariates(const ForecastRecord& record) {
  static const PredictorSet set = PredictorSet::custom({"HRES", "CTRL", "MEAN", "PR0", "MAD"});
  const auto v = derive_predictors(record, set);
  return {v[0], v[1], v[2], v[3], v[4]};
}

std::vector<EmosCase> emos_cases(const Dataset& data, std::span<const std::size_t> indices) {
  std::vector<EmosCase> out;
  out.reserve(indices.size());
  for (auto i : indices) {
    const auto& c = data.cases.at(i);
    if (!c.observation) continue;
    out.push_back({emos_covariates(c.forecast), *c.observation});
  }
  return out;
}

double mean_crps_objective(const EmosModel& m, std::span<const EmosCase> cases) {
  if (cases.empty()) throw DomainError("EMOS objective: no training cases");
  double violation = 0.0;
  double total = 0.0;
  for (const auto& c : cases) {
    const auto link = evaluate_links(m, c.covariates);
    violation += link.violation;
    if (violation > 0.0) continue;
    total += crps_of_predictive(link.params, c.obs);
  }
  const auto n = static_cast<double>(cases.size());
  if (violation > 0.0) return 1e6 + violation / n;
  const double mean = total / n;
  return std::isfinite(mean) ? mean : 1e6;
}

XiEstimate station_xi_climatology(std::span<const double> observations, const XiConfig& config) {
  XiEstimate est;
  est.xi = config.fallback;
  std::vector<double> wet;
  for (double y : observations)
    if (y >= config.dry_threshold) wet.push_back(y);
  if (wet.size() < config.min_positives) {
    est.defaulted = true;
    est.warning = "only " + std::to_string(wet.size()) + " wet observations; shape defaults to " +
                  std::to_string(config.fallback);
    return est;
  }
  std::sort(wet.begin(), wet.end());
  const std::vector<double> w(wet.size(), 1.0 / static_cast<double>(wet.size()));
  try {
    const auto shape = egp_fit_pwm(pwm_triple(wet, w));
    est.xi = std::clamp(shape.xi, config.lower, config.upper);
  } catch (const InfeasibleError& e) {
    est.defaulted = true;
    est.warning = std::string("climatological PWM fit failed (") + e.what() + "); shape defaults to " +
                  std::to_string(config.fallback);
  }
  return est;
}

// ---------------------------------------------------------------------------
// Fitting

namespace {

struct Scaling {
  double unit = 1.0;  // rainfall scale of the training sample
  std::array<double, 5> mean{};
  std::array<double, 5> sd{};
};

Scaling make_scaling(std::span<const EmosCase> cases) {
  Scaling s;
  const auto n = static_cast<double>(cases.size());
  double obs_mean = 0.0;
  for (const auto& c : cases) obs_mean += c.obs;
  obs_mean /= n;
  s.unit = obs_mean > 1e-3 ? obs_mean : 1.0;
  for (std::size_t j = 0; j < 5; ++j) {
    double m = 0.0;
    for (const auto& c : cases) m += c.covariates[j];
    m /= n;
    double v = 0.0;
    for (const auto& c : cases) v += (c.covariates[j] - m) * (c.covariates[j] - m);
    const double sd = std::sqrt(v / n);
    s.mean[j] = m;
    s.sd[j] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

// Internal coordinates: per group, an intercept and slopes on standardized
// covariates, all in units of unit^power.
std::vector<double> to_natural(EmosFamily f, std::span<const double> b, const Scaling& s) {
  std::vector<double> a(b.size());
  std::size_t k = 0;
  for (const auto& g : link_groups(f)) {
    const double u = std::pow(s.unit, g.power);
    double intercept = b[k];
    for (std::size_t j = 0; j < g.covariates.size(); ++j) {
      const auto cov = g.covariates[j];
      const double slope = b[k + 1 + j];
      a[k + 1 + j] = u * slope / s.sd[cov];
      intercept -= slope * s.mean[cov] / s.sd[cov];
    }
    a[k] = u * intercept;
    k += 1 + g.covariates.size();
  }
  return a;
}

std::vector<double> start_point(EmosFamily f, std::span<const EmosCase> cases, const Scaling& s, double xi,
                                const EmosConfig& config) {
  const auto n = static_cast<double>(cases.size());
  double mean = 0.0, var = 0.0;
  for (const auto& c : cases) mean += c.obs;
  mean /= n;
  for (const auto& c : cases) var += (c.obs - mean) * (c.obs - mean);
  var /= n;
  const double sd = std::sqrt(std::max(var, 1e-12));
  const double u = s.unit;

  std::vector<double> b(emos_coefficient_count(f), 0.0);
  switch (f) {
    case EmosFamily::Csg:
      b[0] = (mean + config.delta_start) / u;
      b[5] = std::max(var, 1e-6) / (u * u);
      b[7] = config.delta_start / u;
      break;
    case EmosFamily::Cgev: {
      const double scale = sd * std::sqrt(6.0) / 3.141592653589793;
      b[0] = (mean - 0.5772156649015329 * scale) / u;
      b[5] = std::max(scale, 1e-6) / u;
      b[7] = 0.1;
      break;
    }
    case EmosFamily::Egp: {
      std::vector<double> wet;
      for (const auto& c : cases)
        if (c.obs >= config.xi.dry_threshold) wet.push_back(c.obs);
      const double dry = 1.0 - static_cast<double>(wet.size()) / n;
      double kappa = 1.0;
      double sigma = 1.0;
      if (!wet.empty()) {
        double wet_mean = 0.0;
        for (double y : wet) wet_mean += y;
        wet_mean /= static_cast<double>(wet.size());
        sigma = std::max(wet_mean * (1.0 - xi), 1e-3);
        if (wet.size() >= 3) {
          std::sort(wet.begin(), wet.end());
          const std::vector<double> w(wet.size(), 1.0 / static_cast<double>(wet.size()));
          try {
            const auto shape = egp_fit_pwm(pwm_triple(wet, w));
            kappa = shape.kappa;
            sigma = shape.sigma;
          } catch (const InfeasibleError&) {
          }
        }
      }
      b[0] = sigma / u;
      b[2] = kappa * sigma / u;
      b[7] = dry;
      break;
    }
  }
  return b;
}

}  // namespace

EmosModel emos_fit(std::span<const EmosCase> train, EmosFamily family, std::string station_id,
                   const EmosConfig& config) {
  if (train.size() < config.min_cases)
    throw DataError("EMOS fit for station " + station_id + ": " + std::to_string(train.size()) +
                    " training cases, need at least " + std::to_string(config.min_cases));

  std::vector<EmosCase> cases(train.begin(), train.end());
  std::sort(cases.begin(), cases.end(), [](const EmosCase& a, const EmosCase& b) {
    if (a.obs != b.obs) return a.obs < b.obs;
    return a.covariates < b.covariates;
  });

  EmosModel model;
  model.station_id = std::move(station_id);
  model.family = family;
  model.limits = config.limits;
  if (family == EmosFamily::Egp) {
    if (config.egp_xi) {
      model.xi = *config.egp_xi;
    } else {
      std::vector<double> obs;
      obs.reserve(cases.size());
      for (const auto& c : cases) obs.push_back(c.obs);
      model.xi = station_xi_climatology(obs, config.xi).xi;
    }
  }

  const auto scaling = make_scaling(cases);
  const auto start = start_point(family, cases, scaling, model.xi, config);

  EmosModel trial = model;
  auto objective = [&](std::span<const double> b) {
    trial.coefficients = to_natural(family, b, scaling);
    return mean_crps_objective(trial, cases);
  };

  model.coefficients = to_natural(family, start, scaling);
  const double start_value = mean_crps_objective(model, cases);
  if (!(start_value < 1e6)) {
    for (std::size_t i = 0; i < cases.size(); ++i) {
      const auto link = evaluate_links(model, cases[i].covariates);
      const double score = link.violation > 0.0 ? std::numeric_limits<double>::infinity()
                                                : crps_of_predictive(link.params, cases[i].obs);
      if (!std::isfinite(score))
        throw NumericalError("EMOS fit for station " + model.station_id +
                             ": start objective not finite (training case with observation " +
                             std::to_string(cases[i].obs) + ")");
    }
    throw NumericalError("EMOS fit for station " + model.station_id + ": start objective not finite");
  }

  const auto result = nelder_mead(objective, start, config.optimizer);
  model.coefficients = to_natural(family, result.x, scaling);
  model.evaluations = result.evaluations;
  model.start_objective = result.start_value;
  model.final_objective = result.value;
  return model;
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json EmosModel::to_json() const {
  nlohmann::json coeffs = nlohmann::json::object();
  const auto& names = emos_coefficient_names(family);
  for (std::size_t i = 0; i < coefficients.size(); ++i) coeffs[names[i]] = coefficients[i];
  nlohmann::json j = {{"format", "raincal-emos"},
                      {"version", 1},
                      {"station_id", station_id},
                      {"family", to_string(family)},
                      {"covariates", std::vector<std::string>(kEmosCovariates.begin(), kEmosCovariates.end())},
                      {"coefficients", coefficients},
                      {"coefficient_names", names},
                      {"limits",
                       {{"kappa_floor", limits.kappa_floor},
                        {"sigma_floor", limits.sigma_floor},
                        {"xi_min", limits.xi_min},
                        {"xi_max", limits.xi_max}}},
                      {"evaluations", evaluations},
                      {"start_objective", start_objective},
                      {"final_objective", final_objective}};
  if (family == EmosFamily::Egp) j["xi"] = xi;
  return j;
}

EmosModel EmosModel::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "raincal-emos") throw DataError("not an EMOS model file");
  if (j.value("version", 0) != 1) throw DataError("unsupported EMOS model version");
  EmosModel m;
  m.station_id = j.at("station_id");
  m.family = parse_emos_family(j.at("family").get<std::string>());
  m.coefficients = j.at("coefficients").get<std::vector<double>>();
  if (m.coefficients.size() != emos_coefficient_count(m.family)) throw DataError("EMOS model: wrong coefficient count");
  const auto& lim = j.at("limits");
  m.limits = {lim.at("kappa_floor"), lim.at("sigma_floor"), lim.at("xi_min"), lim.at("xi_max")};
  m.xi = j.value("xi", 0.2);
  m.evaluations = j.at("evaluations");
  m.start_objective = j.at("start_objective");
  m.final_objective = j.at("final_objective");
  return m;
}

}  // namespace raincal
