#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "raincal/predictive.hpp"
#include "raincal/random.hpp"

namespace raincal {

/// 1 - a / b. Throws DomainError for b <= 0.
double crpss(double method_crps, double baseline_crps);

/// Rank of y among the members, 1..K+1; ties placed uniformly at random.
std::size_t rank_of_obs(std::span<const double> members, double y, Rng& rng);

/// Randomized PIT: uniform on [F(y-), F(y)].
double pit_value(double cdf_left, double cdf, Rng& rng);
double pit_value(const PredictiveDistribution& pred, double y, Rng& rng);

/// Rank in 1..K+1: direct ranking for ensembles of exactly K members,
/// otherwise the randomized PIT binned into K+1 equal bins.
std::size_t rank_of_prediction(const PredictiveDistribution& pred, double y, std::size_t k, Rng& rng);

struct RankHistogram {
  std::vector<std::size_t> counts;  // K + 1 bins

  static RankHistogram from_ranks(std::span<const std::size_t> ranks, std::size_t k);
  std::size_t k() const { return counts.empty() ? 0 : counts.size() - 1; }
  std::size_t n_cases() const;
  std::vector<double> frequencies() const;
};

struct HistogramStats {
  double ez = 0.0;
  double vz = 0.0;
  double omega = 0.0;
};

/// E(Z) and V(Z) = 12 K/(K+2) Var(Z) (population variance) of Z = (rank-1)/K,
/// and the normalized entropy of the bin frequencies.
HistogramStats histogram_stats(const RankHistogram& h);

struct FlatnessTest {
  double slope = 0.0;  // chi-square(1) statistics of the linear and quadratic contrasts
  double convexity = 0.0;
  double residual = 0.0;  // chi-square(K-2) remainder
  std::size_t residual_df = 0;
  double p_slope = 1.0;
  double p_convexity = 1.0;
  double p_residual = 1.0;
  double alpha = 0.05;
  bool reject = false;
  bool small_sample = false;  // fewer than 10 (K+1) cases
};

/// Decomposes the chi-square statistic of the histogram into orthonormal
/// linear and quadratic contrasts plus a residual. Each component is tested at
/// alpha / 3 so the overall test has size at most alpha.
FlatnessTest flatness_test(const RankHistogram& h, double alpha = 0.05);

struct RocPoint {
  double threshold = 0.0;  // decision rule: warn when p >= threshold
  double false_alarm = 0.0;
  double hit = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // from (0,0) at threshold +inf to (1,1)
  double auc = 0.0;
  double peirce_max = 0.0;
  double peirce_threshold = 0.0;
};

/// Sweep over every distinct forecast probability plus 0 and 1. Throws
/// DomainError when all outcomes belong to one class.
RocCurve roc_curve(std::span<const double> probabilities, std::span<const char> events);
/// Same with an explicit decision-threshold sweep.
RocCurve roc_curve(std::span<const double> probabilities, std::span<const char> events, std::vector<double> sweep);

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

/// Percentile bootstrap interval for the mean, resampling cases.
Interval bootstrap_mean_ci(std::span<const double> values, std::size_t replicates, double level, std::uint64_t seed);

struct ReportConfig {
  std::size_t k = 35;  // rank histogram has k + 1 bins
  std::vector<double> roc_thresholds = {0.05, 5.0};  // events {rain > s} in mm
  std::size_t bootstrap = 1000;
  double level = 0.95;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  unsigned jobs = 1;
};

struct RocSummary {
  double event_threshold = 0.0;
  std::size_t n_events = 0;
  bool defined = false;  // false when the outcomes are all one class
  double auc = 0.0;
  double peirce_max = 0.0;
  double peirce_threshold = 0.0;
  RocCurve curve;
};

struct ScoreReport {
  std::string method;
  std::size_t n_cases = 0;
  double mean_crps = 0.0;
  Interval crps_ci;
  std::optional<double> baseline_crps;
  std::optional<double> crpss;
  HistogramStats stats;
  FlatnessTest flatness;
  RankHistogram histogram;
  std::vector<RocSummary> roc;
  std::vector<double> crps;  // per case, same order as the input

  nlohmann::json to_json() const;
};

/// Scores each case (CRPS, rank, ROC probabilities). Per-case randomness is
/// seeded from (config.seed, case index), so results do not depend on jobs.
ScoreReport score_predictions(std::string method, std::span<const PredictiveDistribution> predictions,
                              std::span<const double> observations, const ReportConfig& config,
                              std::optional<double> baseline_crps = std::nullopt);

/// Sets baseline_crps and crpss on an existing report.
void attach_baseline(ScoreReport& report, double baseline_crps);

/// Column names of the summary table, one row per report.
std::vector<std::string> summary_columns(const ReportConfig& config);
void write_summary_csv(std::ostream& out, std::span<const ScoreReport> reports, const ReportConfig& config);
void write_rank_histogram_csv(std::ostream& out, const ScoreReport& report);
void write_roc_csv(std::ostream& out, const ScoreReport& report);

}  // namespace raincal
