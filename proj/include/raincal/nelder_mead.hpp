#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace raincal {

struct NelderMeadConfig {
  std::size_t restarts = 20;
  std::size_t evaluations_per_restart = 200;
  double initial_step = 0.25;  // per coordinate, times max(|x_i|, 1)
  double tolerance = 1e-10;    // restart early once the simplex values agree this closely
  double restart_gain = 1e-9;  // stop restarting when a restart improves less than this (relative)
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  double start_value = 0.0;
  std::size_t evaluations = 0;
  std::vector<double> best_trace;  // best value seen after each evaluation
};

/// Restarted Nelder-Mead simplex search. Each restart rebuilds the simplex
/// around the best point so far; the returned point is the best ever seen.
/// Deterministic: no randomness is involved.
NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f, std::vector<double> start,
                             const NelderMeadConfig& config = {});

}  // namespace raincal
