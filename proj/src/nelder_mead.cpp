#include "raincal/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace raincal {

NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f, std::vector<double> start,
                             const NelderMeadConfig& config) {
  const std::size_t n = start.size();
  NelderMeadResult result;
  result.x = start;
  result.value = f(start);
  result.start_value = result.value;
  if (n == 0) return result;

  std::size_t budget = 0;
  auto eval = [&](const std::vector<double>& x) {
    const double v = f(x);
    ++result.evaluations;
    --budget;
    if (v < result.value) {
      result.value = v;
      result.x = x;
    }
    result.best_trace.push_back(result.value);
    return v;
  };

  std::vector<std::vector<double>> simplex(n + 1, std::vector<double>(n));
  std::vector<double> values(n + 1);
  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), trial(n), trial2(n);

  for (std::size_t restart = 0; restart < config.restarts; ++restart) {
    const double before = result.value;
    budget = config.evaluations_per_restart;
    if (budget < n + 1) break;
    simplex[0] = result.x;
    values[0] = result.value;
    for (std::size_t i = 0; i < n; ++i) {
      simplex[i + 1] = result.x;
      simplex[i + 1][i] += config.initial_step * std::max(std::abs(result.x[i]), 1.0);
      values[i + 1] = eval(simplex[i + 1]);
    }

    while (budget > 0) {
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
      const auto best = order.front();
      const auto worst = order.back();
      const auto second = order[n - 1];
      if (std::abs(values[worst] - values[best]) <= config.tolerance * (1.0 + std::abs(values[best]))) break;

      std::fill(centroid.begin(), centroid.end(), 0.0);
      for (std::size_t k = 0; k <= n; ++k) {
        if (k == worst) continue;
        for (std::size_t i = 0; i < n; ++i) centroid[i] += simplex[k][i] / static_cast<double>(n);
      }
      for (std::size_t i = 0; i < n; ++i) trial[i] = centroid[i] + (centroid[i] - simplex[worst][i]);
      const double reflected = eval(trial);

      if (reflected < values[best]) {
        if (budget == 0) {
          simplex[worst] = trial;
          values[worst] = reflected;
          break;
        }
        for (std::size_t i = 0; i < n; ++i) trial2[i] = centroid[i] + 2.0 * (centroid[i] - simplex[worst][i]);
        const double expanded = eval(trial2);
        if (expanded < reflected) {
          simplex[worst] = trial2;
          values[worst] = expanded;
        } else {
          simplex[worst] = trial;
          values[worst] = reflected;
        }
      } else if (reflected < values[second]) {
        simplex[worst] = trial;
        values[worst] = reflected;
      } else {
        if (budget == 0) break;
        const bool outside = reflected < values[worst];
        for (std::size_t i = 0; i < n; ++i)
          trial2[i] = outside ? centroid[i] + 0.5 * (trial[i] - centroid[i])
                              : centroid[i] + 0.5 * (simplex[worst][i] - centroid[i]);
        const double contracted = eval(trial2);
        if (contracted < std::min(reflected, values[worst])) {
          simplex[worst] = trial2;
          values[worst] = contracted;
        } else {
          for (std::size_t k = 0; k <= n && budget > 0; ++k) {
            if (k == best) continue;
            for (std::size_t i = 0; i < n; ++i)
              simplex[k][i] = simplex[best][i] + 0.5 * (simplex[k][i] - simplex[best][i]);
            values[k] = eval(simplex[k]);
          }
        }
      }
    }
    if (restart > 0 && before - result.value <= config.restart_gain * (1.0 + std::abs(before))) break;
  }
  return result;
}

}  // namespace raincal
