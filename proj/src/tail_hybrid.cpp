#include "raincal/tail_hybrid.hpp"

#include <vector>

#include "raincal/error.hpp"

namespace raincal {

PredictiveDistribution HybridPrediction::distribution() const {
  if (fallback_used) return source_ecdf;
  return egp;
}

HybridPrediction fit_egp_tail(const WeightedEcdf& e, const TailConfig& config) {
  HybridPrediction out;
  out.source_ecdf = e;
  out.fallback_used = true;

  double dry = 0.0;
  std::vector<double> values;
  std::vector<double> weights;
  for (std::size_t i = 0; i < e.values.size(); ++i) {
    if (e.values[i] < config.dry_threshold) {
      dry += e.weights[i];
    } else {
      values.push_back(e.values[i]);
      weights.push_back(e.weights[i]);
    }
  }
  out.egp.pi = std::min(1.0, dry);
  if (values.size() < 3) return out;

  const double wet = 1.0 - dry;
  if (!(wet > 1e-12)) return out;
  for (auto& w : weights) w /= wet;

  try {
    const auto triple = pwm_triple(values, weights);
    const auto shape = egp_fit_pwm(triple);
    out.egp = EgpParams{out.egp.pi, shape.kappa, shape.sigma, shape.xi};
    out.egp.validate();
    out.fallback_used = false;
  } catch (const Error&) {
    out.egp = EgpParams{out.egp.pi, 1.0, 1.0, 0.1};
  }
  return out;
}

}  // namespace raincal
