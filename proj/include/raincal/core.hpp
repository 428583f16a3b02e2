#pragma once

#include <chrono>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace raincal {

using Timestamp = std::chrono::sys_seconds;

/// Parses ISO-8601 `YYYY-MM-DD[THH:MM[:SS]][Z|+00:00]` as UTC.
Timestamp parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp t);

/// Shortest round-trip decimal representation; "NA" for NaN.
std::string format_number(double v);

struct Station {
  std::string id;
  std::optional<double> latitude;
  std::optional<double> longitude;
};

/// One station / valid-time forecast: raw ensemble plus auxiliary predictors.
struct ForecastRecord {
  std::string station_id;
  Timestamp valid_time{};
  double lead_time = 0.0;  // hours
  std::vector<double> members;
  std::map<std::string, double> aux;
};

struct ObservationRecord {
  std::string station_id;
  Timestamp valid_time{};
  double amount = 0.0;  // mm per 6 h
};

/// A forecast joined with its verifying observation, if any.
struct Case {
  ForecastRecord forecast;
  std::optional<double> observation;

  bool labeled() const { return observation.has_value(); }
};

struct Dataset {
  std::vector<Case> cases;
  std::vector<std::string> aux_names;  // column order as loaded

  std::size_t member_count() const;
  std::vector<std::string> station_ids() const;  // sorted, unique
  std::vector<std::size_t> station_indices(std::string_view station_id) const;
};

/// Maps CSV headers onto record fields.
struct CsvSchema {
  std::string station_id = "station_id";
  std::string valid_time = "valid_time";
  std::string lead_time = "lead_time";
  std::string observation = "obs";
  std::string member_prefix = "member_";
  std::vector<std::string> member_columns;  // explicit list overrides the prefix
  std::vector<std::string> aux_columns;     // empty: every remaining column

  /// Reads `key = value` lines; list values are comma separated.
  static CsvSchema from_file(const std::string& path);
};

Dataset read_dataset(std::istream& in, const CsvSchema& schema = {});
Dataset load_dataset(const std::string& path, const CsvSchema& schema = {});
void write_dataset(std::ostream& out, const Dataset& data);

// ---------------------------------------------------------------------------
// Predictors

/// Every predictor name the library understands (member statistics first).
const std::vector<std::string>& predictor_vocabulary();
bool is_known_predictor(std::string_view name);
/// True for names computed from the members rather than looked up in aux.
bool is_member_statistic(std::string_view name);

struct PredictorSet {
  enum class Kind { C, A, Custom };

  Kind kind = Kind::Custom;
  std::vector<std::string> columns;

  /// HRES, CTRL, MEAN, PR0.
  static PredictorSet classical();
  /// The full table of available predictors.
  static PredictorSet all();
  static PredictorSet custom(std::vector<std::string> columns);
  /// Vocabulary predictors computable for every case of `data`.
  static PredictorSet available(const Dataset& data);
  /// "C", "A", "auto" or a comma separated list.
  static PredictorSet parse(std::string_view text, const Dataset& data);

  std::size_t size() const { return columns.size(); }
};

/// Type-7 (linear interpolation) empirical quantile of an unsorted sample.
double empirical_quantile(std::vector<double> values, double prob);

std::vector<double> derive_predictors(const ForecastRecord& record, const PredictorSet& set);

/// Dense row-major feature matrix with named columns.
struct FeatureMatrix {
  std::vector<std::string> names;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
  double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  double& at(std::size_t i, std::size_t j) { return values[i * cols + j]; }
  std::vector<double> column(std::size_t j) const;
  std::size_t index_of(std::string_view name) const;  // throws DataError
};

FeatureMatrix feature_matrix(const Dataset& data, std::span<const std::size_t> indices,
                             const PredictorSet& set);

// ---------------------------------------------------------------------------
// Cross-validation plans

enum class CvScheme { MonthlyBlock, LeaveOneDayOut, Holdout };

CvScheme parse_cv_scheme(std::string_view text);
std::string_view to_string(CvScheme scheme);

struct Fold {
  std::vector<std::size_t> validation;
};

/// Folds store validation indices; a fold's training set is the complement.
struct SplitPlan {
  CvScheme scheme = CvScheme::MonthlyBlock;
  std::size_t n_cases = 0;
  std::vector<Fold> folds;

  std::vector<std::size_t> train_indices(std::size_t fold) const;
};

/// Monthly blocks: one fold per calendar month. Leave-one-day-out: one fold per
/// UTC date. Holdout: two chronological halves of the dates, each validated once.
SplitPlan make_cv_plan(const Dataset& data, CvScheme scheme);

}  // namespace raincal
