#include "raincal/simlab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "raincal/error.hpp"

namespace raincal {

void ScenarioSpec::validate() const {
  if (n_stations == 0 || n_days == 0) throw ConfigError("scenario: n_stations and n_days must be positive");
  if (k < 2) throw ConfigError("scenario: ensemble size must be at least 2");
  if (!(dispersion > 0.0)) throw ConfigError("scenario: dispersion factor must be positive");
  if (!(kappa > 0.0) || !(sigma_base > 0.0)) throw ConfigError("scenario: kappa and sigma_base must be positive");
  if (!(xi >= 0.0 && xi < 1.0)) throw ConfigError("scenario: xi must lie in [0, 1)");
  if (!(persistence >= 0.0 && persistence < 1.0)) throw ConfigError("scenario: persistence must lie in [0, 1)");
  if (!(station_spread >= 1.0)) throw ConfigError("scenario: station_spread must be at least 1");
  if (lead_time <= 0.0) throw ConfigError("scenario: lead_time must be positive");
}

double sample_egp(const EgpParams& p, Rng& rng) {
  const double u = uniform01(rng);
  return egp_quantile(u, p);
}

Scenario simulate_scenario(const ScenarioSpec& spec) {
  spec.validate();
  Scenario out;
  out.data.aux_names = {"HRES", "CTRL", "CAPE", "TCC", "HU1500", "UX", "TPW850_q50"};
  const Timestamp start = parse_timestamp(spec.start);
  const std::size_t total = spec.n_stations * spec.n_days;
  out.data.cases.reserve(total);
  out.truth.reserve(total);

  const double rho = spec.persistence;
  const double innovation = std::sqrt(1.0 - rho * rho);
  std::vector<double> draws(spec.k + 1);

  for (std::size_t s = 0; s < spec.n_stations; ++s) {
    Rng rng(derive_seed(spec.seed, s));
    const double position = spec.n_stations == 1 ? 0.0 : 2.0 * static_cast<double>(s) / static_cast<double>(spec.n_stations - 1) - 1.0;
    const double station_scale = std::exp(position * std::log(spec.station_spread));
    char id[16];
    std::snprintf(id, sizeof id, "S%03zu", s + 1);

    double z1 = standard_normal(rng);
    double z2 = standard_normal(rng);
    for (std::size_t d = 0; d < spec.n_days; ++d) {
      if (d > 0) {
        z1 = rho * z1 + innovation * standard_normal(rng);
        z2 = rho * z2 + innovation * standard_normal(rng);
      }
      EgpParams truth;
      truth.pi = 1.0 / (1.0 + std::exp(spec.pi_offset + spec.pi_signal * z1));
      truth.sigma = spec.sigma_base * station_scale * std::exp(spec.sigma_signal * (z2 + 0.5 * z1));
      truth.kappa = spec.kappa;
      truth.xi = spec.xi;

      for (auto& x : draws) x = sample_egp(truth, rng);
      const double centre = std::accumulate(draws.begin(), draws.end(), 0.0) / static_cast<double>(draws.size());
      for (auto& x : draws) x = std::max(0.0, centre + spec.dispersion * (x - centre) + spec.bias);

      Case c;
      c.forecast.station_id = id;
      c.forecast.valid_time = start + std::chrono::days(static_cast<long long>(d));
      c.forecast.lead_time = spec.lead_time;
      c.forecast.members.assign(draws.begin(), draws.begin() + static_cast<std::ptrdiff_t>(spec.k));
      auto noise = [&] { return spec.aux_noise * standard_normal(rng); };
      auto& aux = c.forecast.aux;
      aux["HRES"] = draws[spec.k];
      aux["CTRL"] = draws[0];
      aux["CAPE"] = 100.0 * std::exp(0.8 * z1 + 0.5 * z2 + noise());
      aux["TCC"] = 1.0 / (1.0 + std::exp(-(1.2 * z1 + noise())));
      aux["HU1500"] = 70.0 + 15.0 * std::tanh(z1 + noise());
      aux["UX"] = 10.0 + 3.0 * (z2 + noise());
      aux["TPW850_q50"] = 20.0 + 5.0 * (z2 + 0.6 * z1 + noise());
      c.observation = sample_egp(truth, rng);

      out.data.cases.push_back(std::move(c));
      out.truth.push_back(truth);
    }
  }
  return out;
}

McEstimate mc_crps(const std::function<double(Rng&)>& sampler, double y, std::size_t n_draws, std::uint64_t seed) {
  if (n_draws < 100) throw DomainError("Monte Carlo CRPS needs at least 100 draws");
  Rng rng(seed);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < n_draws; ++i) {
    const double x = sampler(rng);
    const double x2 = sampler(rng);
    const double term = std::abs(x - y) - 0.5 * std::abs(x - x2);
    sum += term;
    sum_sq += term * term;
  }
  const auto n = static_cast<double>(n_draws);
  const double mean = sum / n;
  const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
  return {mean, std::sqrt(var / n)};
}

}  // namespace raincal
