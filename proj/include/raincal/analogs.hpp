#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "raincal/core.hpp"

namespace raincal {

enum class AnalogWeighting { Uniform, Correlation, Vsf };

AnalogWeighting parse_analog_weighting(std::string_view text);
std::string_view to_string(AnalogWeighting w);

struct AnalogConfig {
  std::vector<double> weights;  // w_j, one per archive predictor
  std::vector<double> sigma;    // sigma_f_j; zero entries are ignored
  int t_tilde = 1;              // half window in steps
  double step_hours = 24.0;     // spacing of the window steps
  std::size_t n_analogs = 35;   // callers usually set this to the ensemble size K
};

/// sum_j (w_j / sigma_j) sqrt(sum_i (F_j,i - A_j,i)^2) over blocks stored
/// predictor-major with `window` time offsets each. Predictors with zero
/// weight or sigma are skipped. Throws DataError on a NaN (missing) entry.
double analog_distance(std::span<const double> query, std::span<const double> candidate, std::size_t window,
                       std::span<const double> weights, std::span<const double> sigma);

/// One station's forecast history with derived predictors.
class AnalogArchive {
 public:
  AnalogArchive(const Dataset& data, std::span<const std::size_t> station_indices, const PredictorSet& set);

  const FeatureMatrix& features() const { return features_; }
  std::size_t size() const { return rows_.size(); }
  std::size_t case_index(std::size_t row) const { return rows_[row]; }
  Timestamp valid_time(std::size_t row) const { return times_[row]; }
  std::optional<double> observation(std::size_t row) const { return obs_[row]; }
  std::optional<std::size_t> row_at(Timestamp t) const;
  std::optional<std::size_t> row_of_case(std::size_t case_index) const;

  /// Per-predictor sample standard deviation over `rows`.
  std::vector<double> predictor_sd(std::span<const std::size_t> rows) const;

 private:
  FeatureMatrix features_;
  std::vector<std::size_t> rows_;  // dataset case index per row, ordered by valid time
  std::vector<Timestamp> times_;
  std::vector<std::optional<double>> obs_;
  std::map<Timestamp, std::size_t> by_time_;
};

struct AnalogMatch {
  std::size_t row = 0;
  double distance = 0.0;
  double observation = 0.0;
};

/// The config.n_analogs closest candidates (ascending distance, earlier valid time first on
/// ties). Candidates on the query's date or without an observation are
/// skipped, as are candidates missing any window offset present around the
/// query. Throws DataError when fewer than n candidates remain.
std::vector<AnalogMatch> find_analogs(const AnalogArchive& archive, std::size_t query_row,
                                      std::span<const std::size_t> candidate_rows, const AnalogConfig& config);
/// Query block taken from `queries` (e.g. new forecasts), candidates from `archive`.
std::vector<AnalogMatch> find_analogs(const AnalogArchive& queries, std::size_t query_row, const AnalogArchive& archive,
                                      std::span<const std::size_t> candidate_rows, const AnalogConfig& config);

struct WeightingResult {
  std::vector<double> weights;
  std::vector<std::string> warnings;
};

/// Uniform: all ones. Correlation: |Pearson r| between each predictor and the
/// observations. Vsf: selection frequencies looked up by predictor name.
WeightingResult make_weighting(AnalogWeighting mode, const FeatureMatrix& x, std::span<const double> obs,
                               const std::map<std::string, double>& frequencies = {});

double pearson_correlation(std::span<const double> a, std::span<const double> b);

}  // namespace raincal
