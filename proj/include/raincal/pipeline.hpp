#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "raincal/core.hpp"
#include "raincal/emos.hpp"
#include "raincal/forests.hpp"
#include "raincal/predictive.hpp"
#include "raincal/selection.hpp"
#include "raincal/simlab.hpp"
#include "raincal/tail_hybrid.hpp"
#include "raincal/verification.hpp"

namespace raincal {

/// Every method name, raw ensemble first.
const std::vector<std::string>& method_names();
bool is_method(std::string_view name);

/// Settings for every subcommand. The file format is one `key = value` per
/// line, `#` starts a comment, lists are comma separated. Unknown keys are
/// errors. Keys:
///   config_version (1), data, schema, out, models, method (list or "all"),
///   predictors (C | A | auto | list), cv (monthly_block_cv | leave_one_day_out | holdout),
///   seed, jobs,
///   n_trees, mtry, min_node_size, sample_fraction, gf_orders,
///   dry_threshold,
///   analog_t_tilde, analog_step_hours, n_analogs (0 = ensemble size),
///   emos_restarts, emos_evaluations, emos_min_cases, emos_xi_min_positives,
///   selection_max_k, selection_redundancy, selection_trees, selection_min_rows,
///   roc_thresholds, bootstrap, alpha,
///   sim_stations, sim_days, sim_members, sim_start, sim_kappa, sim_xi, sim_sigma,
///   sim_sigma_signal, sim_pi_offset, sim_pi_signal, sim_station_spread,
///   sim_persistence, sim_aux_noise, sim_bias, sim_dispersion
struct PipelineConfig {
  std::string data;
  std::string schema;
  std::string out = "raincal_out";
  std::string models;  // empty: <out>/models
  std::vector<std::string> methods = {"qrf"};
  std::string predictors = "auto";
  CvScheme cv = CvScheme::MonthlyBlock;
  std::uint64_t seed = 1;
  unsigned jobs = 1;

  ForestConfig forest;
  TailConfig tail;
  int analog_t_tilde = 1;
  double analog_step_hours = 24.0;
  std::size_t n_analogs = 0;
  EmosConfig emos;
  SelectionConfig selection;
  ReportConfig report;
  ScenarioSpec simulation;

  static PipelineConfig from_file(const std::string& path);
  /// Applies one key; throws ConfigError for unknown keys or bad values.
  void set(std::string_view key, std::string_view value);
  std::filesystem::path models_dir() const;
};

/// One out-of-sample prediction or the reason it could not be made.
struct PredictionRecord {
  std::size_t case_index = 0;
  std::optional<PredictiveDistribution> prediction;
  bool fallback = false;  // EGP tail fell back to the forest ECDF
  std::string reject_reason;
};

/// Cross-validated predictions of one method for every case of `data`.
struct MethodPredictions {
  std::string method;
  std::vector<PredictionRecord> records;  // ordered by case index
};

/// Runs every configured method under the configured CV plan. Work is spread
/// over (station, fold) tasks; results are independent of `jobs`.
std::vector<MethodPredictions> cross_validate(const Dataset& data, const PipelineConfig& config);

/// Scores labeled, non-rejected cases. CRPSS uses the raw ensemble on the same cases.
ScoreReport score_method(const Dataset& data, const MethodPredictions& preds, const PipelineConfig& config);

void write_predictions(std::ostream& out, const Dataset& data, const MethodPredictions& preds);
MethodPredictions read_predictions(std::istream& in, const Dataset& data);

// Subcommands. Each returns normally on success and throws raincal::Error on bad input.
void run_simulate(const PipelineConfig& config);
void run_fit(const PipelineConfig& config);
void run_predict(const PipelineConfig& config);
void run_verify(const PipelineConfig& config);
void run_report(const PipelineConfig& config);

}  // namespace raincal
