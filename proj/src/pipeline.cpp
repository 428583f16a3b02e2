#include "raincal/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <sstream>

#include "raincal/analogs.hpp"
#include "raincal/error.hpp"
#include "raincal/parallel.hpp"
#include "raincal/random.hpp"

namespace raincal {

namespace fs = std::filesystem;

const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names = {
      "raw",      "analogs", "analogs_c", "analogs_cor", "analogs_vsf",  "qrf",
      "gf",       "emos_csg", "emos_cgev", "emos_egp",  "qrf_egp_tail", "gf_egp_tail"};
  return names;
}

bool is_method(std::string_view name) {
  const auto& m = method_names();
  return std::find(m.begin(), m.end(), name) != m.end();
}

namespace {

enum class Kind { Raw, Analog, Emos, Forest };

struct MethodSpec {
  std::string name;
  Kind kind = Kind::Raw;
  AnalogWeighting weighting = AnalogWeighting::Uniform;
  bool classical = false;  // analogs on set C
  EmosFamily family = EmosFamily::Egp;
  SplitCriterion criterion = SplitCriterion::Cart;
  bool tail = false;
};

MethodSpec method_spec(const std::string& name) {
  MethodSpec m;
  m.name = name;
  if (name == "raw") return m;
  if (name.starts_with("analogs")) {
    m.kind = Kind::Analog;
    if (name == "analogs_c") m.classical = true;
    if (name == "analogs_cor") m.weighting = AnalogWeighting::Correlation;
    if (name == "analogs_vsf") m.weighting = AnalogWeighting::Vsf;
    return m;
  }
  if (name.starts_with("emos_")) {
    m.kind = Kind::Emos;
    m.family = parse_emos_family(name.substr(5));
    return m;
  }
  if (name == "qrf" || name == "gf" || name == "qrf_egp_tail" || name == "gf_egp_tail") {
    m.kind = Kind::Forest;
    m.criterion = name.starts_with("gf") ? SplitCriterion::Gradient : SplitCriterion::Cart;
    m.tail = name.ends_with("_egp_tail");
    return m;
  }
  throw ConfigError("unknown method '" + name + "'");
}

std::uint64_t method_id(const std::string& name) {
  const auto& m = method_names();
  return static_cast<std::uint64_t>(std::find(m.begin(), m.end(), name) - m.begin());
}

// ---------------------------------------------------------------------------
// Config parsing

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find(',', start);
    if (end == std::string_view::npos) end = s.size();
    const auto item = trim(s.substr(start, end - start));
    if (!item.empty()) out.emplace_back(item);
    start = end + 1;
  }
  return out;
}

template <class T>
T parse_number(std::string_view key, std::string_view text) {
  T v{};
  const auto t = trim(text);
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size())
    throw ConfigError("config key '" + std::string(key) + "': invalid number '" + std::string(text) + "'");
  return v;
}

std::vector<double> parse_doubles(std::string_view key, std::string_view text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) out.push_back(parse_number<double>(key, item));
  return out;
}

bool parse_bool(std::string_view key, std::string_view text) {
  const auto t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError("config key '" + std::string(key) + "': expected true or false");
}

}  // namespace

void PipelineConfig::set(std::string_view key_in, std::string_view value_in) {
  const auto key = std::string(trim(key_in));
  const auto value = std::string(trim(value_in));
  auto num = [&]<class T>(T& field) { field = parse_number<T>(key, value); };

  if (key == "config_version") {
    if (value != "1") throw ConfigError("unsupported config_version '" + value + "' (expected 1)");
  } else if (key == "data") {
    data = value;
  } else if (key == "schema") {
    schema = value;
  } else if (key == "out") {
    out = value;
  } else if (key == "models") {
    models = value;
  } else if (key == "method" || key == "methods") {
    std::vector<std::string> list = value == "all" ? method_names() : split_list(value);
    if (list.empty()) throw ConfigError("no method given");
    for (const auto& m : list)
      if (!is_method(m)) throw ConfigError("unknown method '" + m + "'");
    methods = list;
  } else if (key == "predictors") {
    predictors = value;
  } else if (key == "cv") {
    try {
      cv = parse_cv_scheme(value);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  } else if (key == "seed") {
    num(seed);
  } else if (key == "jobs") {
    num(jobs);
    if (jobs == 0) throw ConfigError("jobs must be at least 1");
  } else if (key == "n_trees") {
    num(forest.n_trees);
  } else if (key == "mtry") {
    num(forest.mtry);
  } else if (key == "min_node_size") {
    num(forest.min_node_size);
  } else if (key == "sample_fraction") {
    num(forest.sample_fraction);
  } else if (key == "bootstrap_replace") {
    forest.replace = parse_bool(key, value);
  } else if (key == "gf_orders") {
    forest.gf_orders = parse_doubles(key, value);
  } else if (key == "dry_threshold") {
    num(tail.dry_threshold);
    emos.xi.dry_threshold = tail.dry_threshold;
  } else if (key == "analog_t_tilde") {
    num(analog_t_tilde);
  } else if (key == "analog_step_hours") {
    num(analog_step_hours);
  } else if (key == "n_analogs") {
    num(n_analogs);
  } else if (key == "emos_restarts") {
    num(emos.optimizer.restarts);
  } else if (key == "emos_evaluations") {
    num(emos.optimizer.evaluations_per_restart);
  } else if (key == "emos_min_cases") {
    num(emos.min_cases);
  } else if (key == "emos_xi_min_positives") {
    num(emos.xi.min_positives);
  } else if (key == "selection_max_k") {
    num(selection.max_k);
  } else if (key == "selection_redundancy") {
    num(selection.redundancy);
  } else if (key == "selection_trees") {
    num(selection.n_trees);
  } else if (key == "selection_min_rows") {
    num(selection.min_rows);
  } else if (key == "roc_thresholds") {
    report.roc_thresholds = parse_doubles(key, value);
  } else if (key == "bootstrap") {
    num(report.bootstrap);
  } else if (key == "alpha") {
    num(report.alpha);
  } else if (key == "sim_stations") {
    num(simulation.n_stations);
  } else if (key == "sim_days") {
    num(simulation.n_days);
  } else if (key == "sim_members") {
    num(simulation.k);
  } else if (key == "sim_start") {
    simulation.start = value;
  } else if (key == "sim_kappa") {
    num(simulation.kappa);
  } else if (key == "sim_xi") {
    num(simulation.xi);
  } else if (key == "sim_sigma") {
    num(simulation.sigma_base);
  } else if (key == "sim_sigma_signal") {
    num(simulation.sigma_signal);
  } else if (key == "sim_pi_offset") {
    num(simulation.pi_offset);
  } else if (key == "sim_pi_signal") {
    num(simulation.pi_signal);
  } else if (key == "sim_station_spread") {
    num(simulation.station_spread);
  } else if (key == "sim_persistence") {
    num(simulation.persistence);
  } else if (key == "sim_aux_noise") {
    num(simulation.aux_noise);
  } else if (key == "sim_bias") {
    num(simulation.bias);
  } else if (key == "sim_dispersion") {
    num(simulation.dispersion);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

PipelineConfig PipelineConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  PipelineConfig c;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + " line " + std::to_string(number) + ": expected key = value");
    try {
      c.set(std::string_view(line).substr(0, eq), std::string_view(line).substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(path + " line " + std::to_string(number) + ": " + e.what());
    }
  }
  // Relative data paths are resolved against the config file's directory.
  const auto base = fs::path(path).parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && fs::path(p).is_relative()) p = (base / p).lexically_normal().string();
  };
  resolve(c.data);
  resolve(c.schema);
  resolve(c.models);
  return c;
}

fs::path PipelineConfig::models_dir() const { return models.empty() ? fs::path(out) / "models" : fs::path(models); }

// ---------------------------------------------------------------------------
// Cross-validation

namespace {

FeatureMatrix subset_rows(const FeatureMatrix& all, std::span<const std::size_t> rows) {
  FeatureMatrix fm;
  fm.names = all.names;
  fm.rows = rows.size();
  fm.cols = all.cols;
  fm.values.reserve(fm.rows * fm.cols);
  for (auto r : rows) {
    const auto row = all.row(r);
    fm.values.insert(fm.values.end(), row.begin(), row.end());
  }
  return fm;
}

std::vector<double> observations_of(const Dataset& data, std::span<const std::size_t> rows) {
  std::vector<double> y;
  y.reserve(rows.size());
  for (auto r : rows) y.push_back(*data.cases[r].observation);
  return y;
}

// Per-station analog archive plus a case -> row map.
struct StationArchive {
  AnalogArchive archive;
  std::map<std::size_t, std::size_t> row_of;

  StationArchive(const Dataset& data, std::span<const std::size_t> cases, const PredictorSet& set)
      : archive(data, cases, set) {
    for (std::size_t r = 0; r < archive.size(); ++r) row_of[archive.case_index(r)] = r;
  }
};

struct Context {
  const Dataset& data;
  const PipelineConfig& config;
  std::vector<MethodSpec> specs;
  PredictorSet predictors;
  FeatureMatrix features;  // every case, `predictors` columns
  std::size_t k = 0;
  std::vector<std::string> stations;
  std::vector<std::vector<std::size_t>> station_cases;
};

AnalogConfig analog_config(const Context& ctx, const AnalogArchive& archive, std::span<const std::size_t> train_rows,
                           const MethodSpec& spec, const std::map<std::string, double>& frequencies) {
  AnalogConfig ac;
  ac.t_tilde = ctx.config.analog_t_tilde;
  ac.step_hours = ctx.config.analog_step_hours;
  ac.n_analogs = ctx.config.n_analogs == 0 ? ctx.k : ctx.config.n_analogs;
  ac.sigma = archive.predictor_sd(train_rows);
  const auto train = subset_rows(archive.features(), train_rows);
  std::vector<double> obs;
  for (auto r : train_rows) obs.push_back(*archive.observation(r));
  ac.weights = make_weighting(spec.weighting, train, obs, frequencies).weights;
  return ac;
}

ForestConfig forest_config(const PipelineConfig& config, SplitCriterion criterion, std::uint64_t seed) {
  ForestConfig fc = config.forest;
  fc.criterion = criterion;
  fc.seed = seed;
  fc.jobs = 1;
  return fc;
}

std::uint64_t task_seed(std::uint64_t master, std::size_t station, std::size_t fold, std::uint64_t salt) {
  return derive_seed(derive_seed(derive_seed(master, station), fold), salt);
}

PredictorSet classical_set() { return PredictorSet::classical(); }

}  // namespace

std::vector<MethodPredictions> cross_validate(const Dataset& data, const PipelineConfig& config) {
  if (data.cases.empty()) throw DataError("dataset is empty");
  Context ctx{data, config, {}, PredictorSet::parse(config.predictors, data), {}, data.member_count(), {}, {}};
  for (const auto& m : config.methods) ctx.specs.push_back(method_spec(m));
  std::vector<std::size_t> all(data.cases.size());
  std::iota(all.begin(), all.end(), 0);
  ctx.features = feature_matrix(data, all, ctx.predictors);
  ctx.stations = data.station_ids();
  for (const auto& s : ctx.stations) ctx.station_cases.push_back(data.station_indices(s));

  const auto plan = make_cv_plan(data, config.cv);
  std::vector<std::size_t> fold_of(data.cases.size());
  for (std::size_t f = 0; f < plan.folds.size(); ++f)
    for (auto i : plan.folds[f].validation) fold_of[i] = f;

  const std::size_t n_st = ctx.stations.size();
  const std::size_t n_folds = plan.folds.size();
  auto train_of = [&](std::size_t s, std::size_t f) {
    std::vector<std::size_t> rows;
    for (auto i : ctx.station_cases[s])
      if (fold_of[i] != f && data.cases[i].labeled()) rows.push_back(i);
    return rows;
  };
  auto valid_of = [&](std::size_t s, std::size_t f) {
    std::vector<std::size_t> rows;
    for (auto i : ctx.station_cases[s])
      if (fold_of[i] == f) rows.push_back(i);
    return rows;
  };

  const bool need_analogs_a = std::any_of(ctx.specs.begin(), ctx.specs.end(),
                                          [](const MethodSpec& m) { return m.kind == Kind::Analog && !m.classical; });
  const bool need_analogs_c = std::any_of(ctx.specs.begin(), ctx.specs.end(),
                                          [](const MethodSpec& m) { return m.kind == Kind::Analog && m.classical; });
  const bool need_vsf = std::any_of(ctx.specs.begin(), ctx.specs.end(),
                                    [](const MethodSpec& m) { return m.kind == Kind::Analog && m.weighting == AnalogWeighting::Vsf; });

  std::vector<std::unique_ptr<StationArchive>> archives_a(n_st), archives_c(n_st);
  parallel_for(n_st, config.jobs, [&](std::size_t s) {
    if (need_analogs_a) archives_a[s] = std::make_unique<StationArchive>(data, ctx.station_cases[s], ctx.predictors);
    if (need_analogs_c) archives_c[s] = std::make_unique<StationArchive>(data, ctx.station_cases[s], classical_set());
  });

  // Selection frequencies per fold, pooled over stations.
  std::vector<std::map<std::string, double>> vsf(n_folds);
  if (need_vsf) {
    std::vector<std::optional<SelectionResult>> sel(n_st * n_folds);
    parallel_for(n_st * n_folds, config.jobs, [&](std::size_t t) {
      const std::size_t s = t / n_folds, f = t % n_folds;
      const auto rows = train_of(s, f);
      SelectionConfig sc = config.selection;
      sc.seed = task_seed(config.seed, s, f, 0x5e1);
      try {
        sel[t] = select_predictors(subset_rows(ctx.features, rows), observations_of(data, rows), sc, ctx.stations[s]);
      } catch (const Error&) {
      }
    });
    for (std::size_t f = 0; f < n_folds; ++f) {
      std::vector<SelectionResult> results;
      for (std::size_t s = 0; s < n_st; ++s)
        if (sel[s * n_folds + f]) results.push_back(*sel[s * n_folds + f]);
      for (const auto& [name, freq] : predictor_frequency(results)) vsf[f][name] = freq;
    }
  }

  std::vector<MethodPredictions> out(ctx.specs.size());
  for (std::size_t m = 0; m < ctx.specs.size(); ++m) {
    out[m].method = ctx.specs[m].name;
    out[m].records.resize(data.cases.size());
    for (std::size_t i = 0; i < data.cases.size(); ++i) out[m].records[i].case_index = i;
  }

  parallel_for(n_st * n_folds, config.jobs, [&](std::size_t t) {
    const std::size_t s = t / n_folds, f = t % n_folds;
    const auto valid = valid_of(s, f);
    if (valid.empty()) return;
    const auto train = train_of(s, f);

    auto reject_all = [&](std::size_t m, const std::string& why) {
      for (auto i : valid) out[m].records[i].reject_reason = why;
    };

    // Forests shared between a method and its tail variant.
    std::map<SplitCriterion, std::optional<Forest>> forests;
    std::map<SplitCriterion, std::string> forest_errors;
    auto forest_for = [&](SplitCriterion c) -> const Forest* {
      if (!forests.count(c)) {
        try {
          if (train.empty()) throw DataError("no labeled training cases");
          forests[c] = Forest::grow(subset_rows(ctx.features, train), observations_of(data, train),
                                    forest_config(config, c, task_seed(config.seed, s, f, c == SplitCriterion::Cart ? 1 : 2)));
        } catch (const Error& e) {
          forests[c] = std::nullopt;
          forest_errors[c] = e.what();
        }
      }
      return forests[c] ? &*forests[c] : nullptr;
    };

    for (std::size_t m = 0; m < ctx.specs.size(); ++m) {
      const auto& spec = ctx.specs[m];
      auto& rec = out[m].records;
      switch (spec.kind) {
        case Kind::Raw:
          for (auto i : valid) rec[i].prediction = Ensemble{data.cases[i].forecast.members};
          break;
        case Kind::Analog: {
          const auto& sa = spec.classical ? *archives_c[s] : *archives_a[s];
          std::vector<std::size_t> train_rows;
          for (auto i : train) train_rows.push_back(sa.row_of.at(i));
          AnalogConfig ac;
          try {
            ac = analog_config(ctx, sa.archive, train_rows, spec, vsf[f]);
          } catch (const Error& e) {
            reject_all(m, e.what());
            break;
          }
          for (auto i : valid) {
            try {
              const auto matches = find_analogs(sa.archive, sa.row_of.at(i), train_rows, ac);
              Ensemble e;
              for (const auto& a : matches) e.members.push_back(a.observation);
              rec[i].prediction = std::move(e);
            } catch (const Error& e) {
              rec[i].reject_reason = e.what();
            }
          }
          break;
        }
        case Kind::Emos: {
          try {
            const auto model = emos_fit(emos_cases(data, train), spec.family, ctx.stations[s], config.emos);
            for (auto i : valid) rec[i].prediction = apply_links(model, emos_covariates(data.cases[i].forecast));
          } catch (const Error& e) {
            reject_all(m, e.what());
          }
          break;
        }
        case Kind::Forest: {
          const auto* forest = forest_for(spec.criterion);
          if (!forest) {
            reject_all(m, forest_errors[spec.criterion]);
            break;
          }
          for (auto i : valid) {
            auto ecdf = forest->weights(ctx.features.row(i));
            if (spec.tail) {
              const auto h = fit_egp_tail(ecdf, config.tail);
              rec[i].prediction = h.distribution();
              rec[i].fallback = h.fallback_used;
            } else {
              rec[i].prediction = std::move(ecdf);
            }
          }
          break;
        }
      }
    }
  });
  return out;
}

ScoreReport score_method(const Dataset& data, const MethodPredictions& preds, const PipelineConfig& config) {
  std::vector<PredictiveDistribution> p;
  std::vector<double> y;
  double raw_total = 0.0;
  for (const auto& r : preds.records) {
    const auto& c = data.cases.at(r.case_index);
    if (!r.prediction || !c.observation) continue;
    p.push_back(*r.prediction);
    y.push_back(*c.observation);
    raw_total += fair_crps(c.forecast.members, *c.observation);
  }
  if (p.empty()) throw DataError("method " + preds.method + ": no labeled predictions to score");
  ReportConfig rc = config.report;
  rc.k = data.member_count();
  rc.seed = derive_seed(config.seed, 0x5c0 + method_id(preds.method));
  rc.jobs = config.jobs;
  auto report = score_predictions(preds.method, p, y, rc);
  const double baseline = raw_total / static_cast<double>(p.size());
  if (baseline > 0.0) attach_baseline(report, baseline);
  return report;
}

// ---------------------------------------------------------------------------
// Prediction files

void write_predictions(std::ostream& out, const Dataset& data, const MethodPredictions& preds) {
  for (const auto& r : preds.records) {
    const auto& c = data.cases.at(r.case_index);
    nlohmann::json j = {{"case", r.case_index},
                        {"station_id", c.forecast.station_id},
                        {"valid_time", format_timestamp(c.forecast.valid_time)},
                        {"method", preds.method}};
    j["obs"] = c.observation ? nlohmann::json(*c.observation) : nlohmann::json(nullptr);
    if (r.prediction) {
      j["prediction"] = to_json(*r.prediction);
      if (r.fallback) j["fallback"] = true;
    } else {
      j["prediction"] = nullptr;
      j["reject"] = r.reject_reason;
    }
    out << j.dump() << '\n';
  }
}

MethodPredictions read_predictions(std::istream& in, const Dataset& data) {
  MethodPredictions mp;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("predictions line " + std::to_string(number) + ": " + e.what());
    }
    PredictionRecord r;
    r.case_index = j.at("case");
    if (r.case_index >= data.cases.size()) throw DataError("predictions line " + std::to_string(number) + ": case out of range");
    const auto& c = data.cases[r.case_index];
    if (j.at("station_id") != c.forecast.station_id || j.at("valid_time") != format_timestamp(c.forecast.valid_time))
      throw DataError("predictions line " + std::to_string(number) + ": case does not match the dataset");
    mp.method = j.at("method");
    if (!j.at("prediction").is_null()) r.prediction = predictive_from_json(j.at("prediction"));
    r.fallback = j.value("fallback", false);
    r.reject_reason = j.value("reject", "");
    mp.records.push_back(std::move(r));
  }
  return mp;
}

// ---------------------------------------------------------------------------
// Subcommands

namespace {

Dataset load_config_data(const PipelineConfig& config) {
  if (config.data.empty()) throw ConfigError("no data file configured (key 'data')");
  const auto schema = config.schema.empty() ? CsvSchema{} : CsvSchema::from_file(config.schema);
  return load_dataset(config.data, schema);
}

std::ofstream open_output(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

void write_rejects(const fs::path& path, const Dataset& data, const MethodPredictions& mp) {
  auto out = open_output(path);
  out << "station_id,valid_time,reason\n";
  for (const auto& r : mp.records) {
    if (r.prediction) continue;
    const auto& c = data.cases[r.case_index];
    std::string reason = r.reject_reason;
    std::replace(reason.begin(), reason.end(), ',', ';');
    std::replace(reason.begin(), reason.end(), '\n', ' ');
    out << c.forecast.station_id << ',' << format_timestamp(c.forecast.valid_time) << ',' << reason << '\n';
  }
}

void write_reports(const Dataset& data, const std::vector<MethodPredictions>& all, const PipelineConfig& config) {
  const fs::path out_dir(config.out);
  std::vector<ScoreReport> reports;
  for (const auto& mp : all) {
    auto report = score_method(data, mp, config);
    open_output(out_dir / ("report_" + mp.method + ".json")) << report.to_json().dump(2) << '\n';
    {
      auto h = open_output(out_dir / ("rank_histogram_" + mp.method + ".csv"));
      write_rank_histogram_csv(h, report);
    }
    {
      auto r = open_output(out_dir / ("roc_" + mp.method + ".csv"));
      write_roc_csv(r, report);
    }
    report.crps.clear();
    reports.push_back(std::move(report));
  }
  auto summary = open_output(out_dir / "summary.csv");
  write_summary_csv(summary, reports, config.report);
}

}  // namespace

void run_simulate(const PipelineConfig& config) {
  auto spec = config.simulation;
  spec.seed = config.seed;
  const auto scenario = simulate_scenario(spec);
  const fs::path out_dir(config.out);
  {
    auto out = open_output(out_dir / "data.csv");
    write_dataset(out, scenario.data);
  }
  auto truth = open_output(out_dir / "truth.csv");
  truth << "station_id,valid_time,pi,kappa,sigma,xi\n";
  for (std::size_t i = 0; i < scenario.truth.size(); ++i) {
    const auto& c = scenario.data.cases[i].forecast;
    const auto& t = scenario.truth[i];
    truth << c.station_id << ',' << format_timestamp(c.valid_time) << ',' << format_number(t.pi) << ','
          << format_number(t.kappa) << ',' << format_number(t.sigma) << ',' << format_number(t.xi) << '\n';
  }
}

void run_verify(const PipelineConfig& config) {
  const auto data = load_config_data(config);
  const auto all = cross_validate(data, config);
  const fs::path out_dir(config.out);
  for (const auto& mp : all) {
    auto p = open_output(out_dir / ("predictions_" + mp.method + ".jsonl"));
    write_predictions(p, data, mp);
    write_rejects(out_dir / ("rejects_" + mp.method + ".csv"), data, mp);
  }
  write_reports(data, all, config);
}

void run_report(const PipelineConfig& config) {
  const auto data = load_config_data(config);
  std::vector<MethodPredictions> all;
  for (const auto& m : config.methods) {
    const auto path = fs::path(config.out) / ("predictions_" + m + ".jsonl");
    std::ifstream in(path);
    if (!in) throw ConfigError("missing predictions file " + path.string() + " (run verify or predict first)");
    auto mp = read_predictions(in, data);
    mp.method = m;
    all.push_back(std::move(mp));
  }
  write_reports(data, all, config);
}

void run_fit(const PipelineConfig& config) {
  const auto data = load_config_data(config);
  const auto predictors = PredictorSet::parse(config.predictors, data);
  const auto stations = data.station_ids();
  const auto k = data.member_count();
  std::vector<MethodSpec> specs;
  for (const auto& m : config.methods) specs.push_back(method_spec(m));
  std::vector<std::size_t> all(data.cases.size());
  std::iota(all.begin(), all.end(), 0);
  const auto features = feature_matrix(data, all, predictors);

  auto labeled = [&](const std::vector<std::size_t>& cases) {
    std::vector<std::size_t> rows;
    for (auto i : cases)
      if (data.cases[i].labeled()) rows.push_back(i);
    return rows;
  };

  std::map<std::string, double> frequencies;
  if (std::any_of(specs.begin(), specs.end(), [](const MethodSpec& m) { return m.weighting == AnalogWeighting::Vsf; })) {
    std::vector<std::optional<SelectionResult>> sel(stations.size());
    parallel_for(stations.size(), config.jobs, [&](std::size_t s) {
      const auto rows = labeled(data.station_indices(stations[s]));
      SelectionConfig sc = config.selection;
      sc.seed = task_seed(config.seed, s, 0, 0x5e1);
      try {
        sel[s] = select_predictors(subset_rows(features, rows), observations_of(data, rows), sc, stations[s]);
      } catch (const Error&) {
      }
    });
    std::vector<SelectionResult> results;
    for (auto& r : sel)
      if (r) results.push_back(*r);
    for (const auto& [name, f] : predictor_frequency(results)) frequencies[name] = f;
    auto out = open_output(config.models_dir() / "selection_frequency.csv");
    out << "predictor,frequency\n";
    for (const auto& [name, f] : predictor_frequency(results)) out << name << ',' << format_number(f) << '\n';
  }

  const auto archive_path = fs::absolute(config.data).lexically_normal().string();
  std::vector<std::string> errors(stations.size());
  parallel_for(stations.size(), config.jobs, [&](std::size_t s) {
    const auto station_cases = data.station_indices(stations[s]);
    const auto rows = labeled(station_cases);
    for (const auto& spec : specs) {
      const auto path = config.models_dir() / spec.name / (stations[s] + ".json");
      nlohmann::json j;
      try {
        switch (spec.kind) {
          case Kind::Raw:
            j = {{"method", spec.name}, {"station_id", stations[s]}};
            break;
          case Kind::Analog: {
            const auto set = spec.classical ? classical_set() : predictors;
            StationArchive sa(data, station_cases, set);
            std::vector<std::size_t> train_rows;
            for (auto i : rows) train_rows.push_back(sa.row_of.at(i));
            Context ctx{data, config, {}, set, {}, k, {}, {}};
            const auto ac = analog_config(ctx, sa.archive, train_rows, spec, frequencies);
            j = {{"method", spec.name},   {"station_id", stations[s]}, {"predictors", set.columns},
                 {"weights", ac.weights}, {"sigma", ac.sigma},         {"t_tilde", ac.t_tilde},
                 {"step_hours", ac.step_hours}, {"n_analogs", ac.n_analogs}, {"archive", archive_path},
                 {"schema", config.schema}};
            break;
          }
          case Kind::Emos: {
            const auto model = emos_fit(emos_cases(data, rows), spec.family, stations[s], config.emos);
            j = {{"method", spec.name}, {"model", model.to_json()}};
            break;
          }
          case Kind::Forest: {
            const auto forest = Forest::grow(subset_rows(features, rows), observations_of(data, rows),
                                             forest_config(config, spec.criterion, task_seed(config.seed, s, 0, 1)));
            j = {{"method", spec.name}, {"dry_threshold", config.tail.dry_threshold}, {"forest", forest.to_json()}};
            break;
          }
        }
      } catch (const Error& e) {
        errors[s] += spec.name + ": " + e.what() + "; ";
        continue;
      }
      open_output(path) << j.dump() << '\n';
    }
  });
  std::string failures;
  for (std::size_t s = 0; s < stations.size(); ++s)
    if (!errors[s].empty()) failures += "station " + stations[s] + ": " + errors[s] + "\n";
  if (!failures.empty()) {
    auto out = open_output(config.models_dir() / "fit_errors.txt");
    out << failures;
  }
}

void run_predict(const PipelineConfig& config) {
  const auto data = load_config_data(config);
  const auto stations = data.station_ids();
  std::map<std::string, Dataset> archives;  // loaded lazily, keyed by path
  std::mutex archive_mutex;

  for (const auto& name : config.methods) {
    const auto spec = method_spec(name);
    MethodPredictions mp;
    mp.method = name;
    mp.records.resize(data.cases.size());
    for (std::size_t i = 0; i < data.cases.size(); ++i) mp.records[i].case_index = i;

    parallel_for(stations.size(), config.jobs, [&](std::size_t s) {
      const auto cases = data.station_indices(stations[s]);
      auto reject = [&](const std::string& why) {
        for (auto i : cases) mp.records[i].reject_reason = why;
      };
      if (spec.kind == Kind::Raw) {
        for (auto i : cases) mp.records[i].prediction = Ensemble{data.cases[i].forecast.members};
        return;
      }
      const auto path = config.models_dir() / name / (stations[s] + ".json");
      std::ifstream in(path);
      if (!in) {
        reject("no fitted model at " + path.string());
        return;
      }
      try {
        const auto j = nlohmann::json::parse(in);
        switch (spec.kind) {
          case Kind::Raw:
            break;
          case Kind::Emos: {
            const auto model = EmosModel::from_json(j.at("model"));
            for (auto i : cases) mp.records[i].prediction = apply_links(model, emos_covariates(data.cases[i].forecast));
            break;
          }
          case Kind::Forest: {
            const auto forest = Forest::from_json(j.at("forest"));
            const auto set = PredictorSet::custom(forest.predictor_names());
            TailConfig tc;
            tc.dry_threshold = j.at("dry_threshold");
            for (auto i : cases) {
              try {
                auto ecdf = forest.weights(derive_predictors(data.cases[i].forecast, set));
                if (spec.tail) {
                  const auto h = fit_egp_tail(ecdf, tc);
                  mp.records[i].prediction = h.distribution();
                  mp.records[i].fallback = h.fallback_used;
                } else {
                  mp.records[i].prediction = std::move(ecdf);
                }
              } catch (const Error& e) {
                mp.records[i].reject_reason = e.what();
              }
            }
            break;
          }
          case Kind::Analog: {
            const auto set = PredictorSet::custom(j.at("predictors").get<std::vector<std::string>>());
            const auto archive_file = j.at("archive").get<std::string>();
            const Dataset* archive_data = nullptr;
            {
              std::lock_guard lock(archive_mutex);
              auto it = archives.find(archive_file);
              if (it == archives.end()) {
                const auto schema_file = j.value("schema", std::string());
                it = archives.emplace(archive_file, load_dataset(archive_file, schema_file.empty() ? CsvSchema{}
                                                                                                 : CsvSchema::from_file(schema_file)))
                         .first;
              }
              archive_data = &it->second;
            }
            const auto archive_cases = archive_data->station_indices(stations[s]);
            const AnalogArchive archive(*archive_data, archive_cases, set);
            const AnalogArchive queries(data, cases, set);
            std::vector<std::size_t> candidates;
            for (std::size_t r = 0; r < archive.size(); ++r)
              if (archive.observation(r)) candidates.push_back(r);
            AnalogConfig ac;
            ac.weights = j.at("weights").get<std::vector<double>>();
            ac.sigma = j.at("sigma").get<std::vector<double>>();
            ac.t_tilde = j.at("t_tilde");
            ac.step_hours = j.at("step_hours");
            ac.n_analogs = j.at("n_analogs");
            for (std::size_t q = 0; q < queries.size(); ++q) {
              auto& rec = mp.records[queries.case_index(q)];
              try {
                Ensemble e;
                for (const auto& a : find_analogs(queries, q, archive, candidates, ac)) e.members.push_back(a.observation);
                rec.prediction = std::move(e);
              } catch (const Error& e) {
                rec.reject_reason = e.what();
              }
            }
            break;
          }
        }
      } catch (const nlohmann::json::exception& e) {
        reject(std::string("malformed model file: ") + e.what());
      } catch (const Error& e) {
        reject(e.what());
      }
    });

    const fs::path out_dir(config.out);
    auto p = open_output(out_dir / ("predictions_" + name + ".jsonl"));
    write_predictions(p, data, mp);
    write_rejects(out_dir / ("rejects_" + name + ".csv"), data, mp);
  }
}

}  // namespace raincal
