#pragma once

#include "raincal/distributions.hpp"
#include "raincal/ecdf.hpp"
#include "raincal/predictive.hpp"

namespace raincal {

struct TailConfig {
  double dry_threshold = 0.05;  // responses below this count as dry (mm)
};

/// EGP fitted to a forest's weighted ECDF: pi by counting dry weight, the
/// positive part by probability weighted moments.
struct HybridPrediction {
  EgpParams egp;
  WeightedEcdf source_ecdf;
  bool fallback_used = false;

  /// The EGP, or the source ECDF when the fit fell back.
  PredictiveDistribution distribution() const;
};

/// Never throws on fit failure: fewer than three distinct positive values or
/// an infeasible moment system returns the ECDF with fallback_used set.
HybridPrediction fit_egp_tail(const WeightedEcdf& e, const TailConfig& config = {});

}  // namespace raincal
