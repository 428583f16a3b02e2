#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "raincal/core.hpp"
#include "raincal/distributions.hpp"
#include "raincal/random.hpp"

namespace raincal {

/// Synthetic stations with a known conditional rainfall distribution.
///
/// Per station and day a latent state (z1, z2) follows a stationary AR(1)
/// with unit-variance margins. The truth is EGP with
///   pi    = 1 / (1 + exp(pi_offset + pi_signal * z1))
///   sigma = sigma_base * station_scale * exp(sigma_signal * z2 + 0.5 * sigma_signal * z1)
///   kappa, xi fixed.
/// Station scales are spread evenly in log space over [1/station_spread, station_spread].
/// The raw ensemble draws K + 1 values from the truth (the extra one is HRES),
/// then shrinks them towards their mean by `dispersion`, adds `bias`, and
/// clips at zero. Auxiliary predictors are noisy transforms of the latent state.
struct ScenarioSpec {
  std::size_t n_stations = 4;
  std::size_t n_days = 1000;  // daily cases per station
  std::size_t k = 35;
  std::string start = "2015-01-01T18:00:00Z";
  double lead_time = 51.0;
  double kappa = 0.8;
  double xi = 0.2;
  double sigma_base = 2.0;
  double sigma_signal = 0.5;
  double pi_offset = 0.0;
  double pi_signal = 1.5;
  double station_spread = 1.5;
  double persistence = 0.7;
  double aux_noise = 0.3;
  double bias = 0.0;
  double dispersion = 1.0;
  std::uint64_t seed = 1;

  void validate() const;  // throws ConfigError
};

struct Scenario {
  Dataset data;
  std::vector<EgpParams> truth;  // per case, aligned with data.cases
};

/// Cases are ordered by station, then valid time. Same scenario, same output.
Scenario simulate_scenario(const ScenarioSpec& spec);

/// Inverse-transform draw from an EGP.
double sample_egp(const EgpParams& p, Rng& rng);

struct McEstimate {
  double value = 0.0;
  double standard_error = 0.0;
};

/// Kernel-form Monte Carlo CRPS: mean of |X - y| - |X - X'| / 2 over
/// independent pairs (X, X'). Throws DomainError for fewer than 100 draws.
McEstimate mc_crps(const std::function<double(Rng&)>& sampler, double y, std::size_t n_draws, std::uint64_t seed);

}  // namespace raincal
