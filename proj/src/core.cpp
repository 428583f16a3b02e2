#include "raincal/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "raincal/error.hpp"

namespace raincal {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

int parse_int(std::string_view s, std::string_view whole) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw DataError("invalid timestamp '" + std::string(whole) + "'");
  return v;
}

std::optional<double> parse_number(std::string_view s) {
  s = trim(s);
  if (s.empty() || s == "NA" || s == "nan" || s == "NaN") return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw DataError("not a number: '" + std::string(s) + "'");
  return v;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto end = s.find(',', start);
    const auto piece = trim(s.substr(start, end == std::string_view::npos ? s.npos : end - start));
    if (!piece.empty()) out.emplace_back(piece);
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

Timestamp parse_timestamp(std::string_view text) {
  const auto s = trim(text);
  if (s.size() < 10 || s[4] != '-' || s[7] != '-') throw DataError("invalid timestamp '" + std::string(text) + "'");
  const int year = parse_int(s.substr(0, 4), text);
  const int month = parse_int(s.substr(5, 2), text);
  const int day = parse_int(s.substr(8, 2), text);
  int hour = 0, minute = 0, second = 0;
  std::string_view rest = s.substr(10);
  if (!rest.empty() && (rest[0] == 'T' || rest[0] == ' ')) {
    if (rest.size() < 6 || rest[3] != ':') throw DataError("invalid timestamp '" + std::string(text) + "'");
    hour = parse_int(rest.substr(1, 2), text);
    minute = parse_int(rest.substr(4, 2), text);
    rest.remove_prefix(6);
    if (!rest.empty() && rest[0] == ':') {
      if (rest.size() < 3) throw DataError("invalid timestamp '" + std::string(text) + "'");
      second = parse_int(rest.substr(1, 2), text);
      rest.remove_prefix(3);
    }
  }
  if (!(rest.empty() || rest == "Z" || rest == "+00:00" || rest == "+0000"))
    throw DataError("only UTC timestamps are supported: '" + std::string(text) + "'");
  const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                                        std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok() || hour > 23 || minute > 59 || second > 60)
    throw DataError("invalid timestamp '" + std::string(text) + "'");
  return std::chrono::sys_days{ymd} + std::chrono::hours{hour} + std::chrono::minutes{minute} +
         std::chrono::seconds{second};
}

std::string format_timestamp(Timestamp t) {
  const auto day = std::chrono::floor<std::chrono::days>(t);
  const std::chrono::year_month_day ymd{day};
  const std::chrono::hh_mm_ss hms{t - day};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

std::size_t Dataset::member_count() const {
  return cases.empty() ? 0 : cases.front().forecast.members.size();
}

std::vector<std::string> Dataset::station_ids() const {
  std::set<std::string> ids;
  for (const auto& c : cases) ids.insert(c.forecast.station_id);
  return {ids.begin(), ids.end()};
}

std::vector<std::size_t> Dataset::station_indices(std::string_view station_id) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < cases.size(); ++i)
    if (cases[i].forecast.station_id == station_id) out.push_back(i);
  return out;
}

CsvSchema CsvSchema::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open schema file " + path);
  CsvSchema schema;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos)
      throw DataError(path + ":" + std::to_string(line_no) + ": expected key = value");
    const auto key = trim(view.substr(0, eq));
    const std::string value(trim(view.substr(eq + 1)));
    if (key == "station_id") schema.station_id = value;
    else if (key == "valid_time") schema.valid_time = value;
    else if (key == "lead_time") schema.lead_time = value;
    else if (key == "obs" || key == "observation") schema.observation = value;
    else if (key == "member_prefix") schema.member_prefix = value;
    else if (key == "members") schema.member_columns = split_list(value);
    else if (key == "aux") schema.aux_columns = split_list(value);
    else throw DataError(path + ":" + std::to_string(line_no) + ": unknown schema key '" + std::string(key) + "'");
  }
  return schema;
}

Dataset read_dataset(std::istream& in, const CsvSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty CSV input (missing header)");
  const auto header = split_csv_line(line);
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[std::string(trim(header[i]))] = i;

  auto require = [&](const std::string& name) {
    auto it = col.find(name);
    if (it == col.end()) throw DataError("missing column '" + name + "'");
    return it->second;
  };
  const auto station_col = require(schema.station_id);
  const auto time_col = require(schema.valid_time);
  const auto lead_col = require(schema.lead_time);
  const auto obs_col = require(schema.observation);

  std::vector<std::size_t> member_cols;
  std::set<std::size_t> used{station_col, time_col, lead_col, obs_col};
  if (!schema.member_columns.empty()) {
    for (const auto& m : schema.member_columns) member_cols.push_back(require(m));
  } else {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (std::string_view(header[i]).starts_with(schema.member_prefix)) member_cols.push_back(i);
  }
  if (member_cols.size() < 2) throw DataError("need at least 2 ensemble member columns");
  used.insert(member_cols.begin(), member_cols.end());

  Dataset data;
  std::vector<std::size_t> aux_cols;
  if (!schema.aux_columns.empty()) {
    for (const auto& a : schema.aux_columns) {
      aux_cols.push_back(require(a));
      data.aux_names.push_back(a);
    }
  } else {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (used.count(i)) continue;
      aux_cols.push_back(i);
      data.aux_names.emplace_back(trim(header[i]));
    }
  }

  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    const auto where = "line " + std::to_string(line_no) + ": ";
    if (fields.size() != header.size())
      throw DataError(where + "malformed row: expected " + std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    try {
      Case c;
      auto& f = c.forecast;
      f.station_id = std::string(trim(fields[station_col]));
      if (f.station_id.empty()) throw DataError("empty station_id");
      f.valid_time = parse_timestamp(fields[time_col]);
      const auto lead = parse_number(fields[lead_col]);
      if (!lead || *lead <= 0.0) throw DataError("lead_time must be positive");
      f.lead_time = *lead;
      f.members.reserve(member_cols.size());
      for (auto mc : member_cols) {
        const auto v = parse_number(fields[mc]);
        if (!v) throw DataError("member count inconsistent across rows (empty member field)");
        if (*v < 0.0) throw DataError("negative rainfall in member column '" + header[mc] + "'");
        f.members.push_back(*v);
      }
      for (std::size_t a = 0; a < aux_cols.size(); ++a) {
        const auto v = parse_number(fields[aux_cols[a]]);
        if (v) f.aux.emplace(data.aux_names[a], *v);
      }
      c.observation = parse_number(fields[obs_col]);
      if (c.observation && *c.observation < 0.0) throw DataError("negative rainfall in observation");
      data.cases.push_back(std::move(c));
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    }
  }
  return data;
}

Dataset load_dataset(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file " + path);
  try {
    return read_dataset(in, schema);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void write_dataset(std::ostream& out, const Dataset& data) {
  const auto k = data.member_count();
  out << "station_id,valid_time,lead_time,obs";
  for (std::size_t m = 0; m < k; ++m) {
    char buf[32];
    std::snprintf(buf, sizeof buf, ",member_%03zu", m + 1);
    out << buf;
  }
  for (const auto& a : data.aux_names) out << ',' << a;
  out << '\n';
  for (const auto& c : data.cases) {
    const auto& f = c.forecast;
    out << f.station_id << ',' << format_timestamp(f.valid_time) << ',' << format_number(f.lead_time) << ',';
    if (c.observation) out << format_number(*c.observation);
    else out << "NA";
    for (double m : f.members) out << ',' << format_number(m);
    for (const auto& a : data.aux_names) {
      out << ',';
      auto it = f.aux.find(a);
      if (it != f.aux.end()) out << format_number(it->second);
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Predictors

namespace {

const std::vector<std::string> kMemberStatistics = {"MEAN", "MED",  "Q10",  "Q90", "PR0",   "PR1", "PR3",
                                                     "PR5",  "PR10", "PR20", "SIGMA", "IQR", "MAD"};

const std::vector<std::string>& table_predictors() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v = {"HRES", "CTRL", "MEAN", "MED",   "Q10", "Q90",    "PR0",
                                  "PR1",  "PR3",  "PR5",  "PR10",  "PR20", "SIGMA", "IQR",
                                  "HU1500", "UX", "VX",   "FX",    "TCC",  "RR6CV", "CAPE"};
    for (const char* family : {"HU", "P", "TCC", "RR6CV", "U10", "V10", "U500", "V500", "FF500", "TPW850",
                               "FLIR6", "FLVIS6", "T", "FF10"})
      for (const char* q : {"_q10", "_q50", "_q90"}) v.push_back(std::string(family) + q);
    return v;
  }();
  return names;
}

double threshold_of(std::string_view name) {
  double t = 0.0;
  std::from_chars(name.data() + 2, name.data() + name.size(), t);
  return t;
}

}  // namespace

const std::vector<std::string>& predictor_vocabulary() {
  static const std::vector<std::string> vocab = [] {
    auto v = table_predictors();
    v.push_back("MAD");
    return v;
  }();
  return vocab;
}

bool is_known_predictor(std::string_view name) {
  const auto& v = predictor_vocabulary();
  return std::find(v.begin(), v.end(), name) != v.end();
}

bool is_member_statistic(std::string_view name) {
  return std::find(kMemberStatistics.begin(), kMemberStatistics.end(), name) != kMemberStatistics.end();
}

PredictorSet PredictorSet::classical() { return {Kind::C, {"HRES", "CTRL", "MEAN", "PR0"}}; }

PredictorSet PredictorSet::all() { return {Kind::A, table_predictors()}; }

PredictorSet PredictorSet::custom(std::vector<std::string> columns) {
  if (columns.empty()) throw DomainError("predictor set must not be empty");
  std::set<std::string> seen;
  for (const auto& c : columns) {
    if (!is_known_predictor(c)) throw DomainError("unknown predictor '" + c + "'");
    if (!seen.insert(c).second) throw DomainError("duplicate predictor '" + c + "'");
  }
  return {Kind::Custom, std::move(columns)};
}

PredictorSet PredictorSet::available(const Dataset& data) {
  std::vector<std::string> out;
  for (const auto& name : table_predictors()) {
    bool ok = true;
    if (!is_member_statistic(name)) {
      for (const auto& c : data.cases) {
        if (!c.forecast.aux.count(name) && !(name == "CTRL" && !c.forecast.members.empty())) {
          ok = false;
          break;
        }
      }
    }
    if (ok) out.push_back(name);
  }
  return custom(std::move(out));
}

PredictorSet PredictorSet::parse(std::string_view text, const Dataset& data) {
  const auto t = trim(text);
  if (t == "C") return classical();
  if (t == "A") return all();
  if (t == "auto") return available(data);
  return custom(split_list(t));
}

double empirical_quantile(std::vector<double> values, double prob) {
  if (values.empty()) throw DomainError("quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<double> derive_predictors(const ForecastRecord& record, const PredictorSet& set) {
  const auto& m = record.members;
  const auto k = static_cast<double>(m.size());
  std::vector<double> sorted = m;
  std::sort(sorted.begin(), sorted.end());
  // Sum in sorted order so the result does not depend on member order.
  double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / k;
  auto quantile = [&](double p) {
    const double h = (k - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  };

  std::vector<double> out;
  out.reserve(set.columns.size());
  for (const auto& name : set.columns) {
    if (name == "MEAN") {
      out.push_back(mean);
    } else if (name == "MED") {
      out.push_back(quantile(0.5));
    } else if (name == "Q10") {
      out.push_back(quantile(0.1));
    } else if (name == "Q90") {
      out.push_back(quantile(0.9));
    } else if (name == "IQR") {
      out.push_back(quantile(0.75) - quantile(0.25));
    } else if (name == "SIGMA") {
      double ss = 0.0;
      for (double v : sorted) ss += (v - mean) * (v - mean);
      out.push_back(std::sqrt(ss / (k - 1.0)));
    } else if (name == "MAD") {
      double s = 0.0;
      for (double v : sorted) s += std::abs(v - mean);
      out.push_back(s / k);
    } else if (name.starts_with("PR") && is_member_statistic(name)) {
      const double t = threshold_of(name);
      const auto wet = std::count_if(sorted.begin(), sorted.end(), [t](double v) { return v > t; });
      out.push_back(static_cast<double>(wet) / k);
    } else {
      auto it = record.aux.find(name);
      if (it != record.aux.end()) {
        out.push_back(it->second);
      } else if (name == "CTRL" && !m.empty()) {
        out.push_back(m.front());  // control run is the first member
      } else {
        throw DataError("predictor '" + name + "' absent from auxiliary data for station " + record.station_id +
                        " at " + format_timestamp(record.valid_time));
      }
    }
  }
  return out;
}

std::vector<double> FeatureMatrix::column(std::size_t j) const {
  std::vector<double> out(rows);
  for (std::size_t i = 0; i < rows; ++i) out[i] = at(i, j);
  return out;
}

std::size_t FeatureMatrix::index_of(std::string_view name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw DataError("unknown predictor '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - names.begin());
}

FeatureMatrix feature_matrix(const Dataset& data, std::span<const std::size_t> indices, const PredictorSet& set) {
  FeatureMatrix fm;
  fm.names = set.columns;
  fm.rows = indices.size();
  fm.cols = set.columns.size();
  fm.values.reserve(fm.rows * fm.cols);
  for (auto i : indices) {
    const auto row = derive_predictors(data.cases.at(i).forecast, set);
    fm.values.insert(fm.values.end(), row.begin(), row.end());
  }
  return fm;
}

// ---------------------------------------------------------------------------
// Cross-validation plans

CvScheme parse_cv_scheme(std::string_view text) {
  const auto t = trim(text);
  if (t == "monthly_block_cv") return CvScheme::MonthlyBlock;
  if (t == "leave_one_day_out") return CvScheme::LeaveOneDayOut;
  if (t == "holdout") return CvScheme::Holdout;
  throw ConfigError("unknown cv scheme '" + std::string(t) + "'");
}

std::string_view to_string(CvScheme scheme) {
  switch (scheme) {
    case CvScheme::MonthlyBlock: return "monthly_block_cv";
    case CvScheme::LeaveOneDayOut: return "leave_one_day_out";
    case CvScheme::Holdout: return "holdout";
  }
  return "?";
}

SplitPlan make_cv_plan(const Dataset& data, CvScheme scheme) {
  if (data.cases.empty()) throw DataError("cannot build a cross-validation plan for an empty dataset");
  auto day_of = [](const Case& c) { return std::chrono::floor<std::chrono::days>(c.forecast.valid_time); };
  std::vector<long> keys(data.cases.size());
  for (std::size_t i = 0; i < data.cases.size(); ++i) {
    const auto day = day_of(data.cases[i]);
    if (scheme == CvScheme::MonthlyBlock) {
      const std::chrono::year_month_day ymd{day};
      keys[i] = static_cast<int>(ymd.year()) * 12L + static_cast<long>(static_cast<unsigned>(ymd.month())) - 1;
    } else {
      keys[i] = day.time_since_epoch().count();
    }
  }
  std::vector<long> distinct(keys);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (scheme == CvScheme::MonthlyBlock && distinct.size() < 2)
    throw DataError("monthly_block_cv needs at least 2 distinct calendar months");

  std::vector<std::size_t> group(keys.size());
  std::size_t n_groups = distinct.size();
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const auto pos = static_cast<std::size_t>(std::lower_bound(distinct.begin(), distinct.end(), keys[i]) -
                                              distinct.begin());
    group[i] = pos;
  }
  if (scheme == CvScheme::Holdout) {
    if (distinct.size() < 2) throw DataError("holdout needs at least 2 distinct dates");
    const auto half = distinct.size() / 2;
    for (auto& g : group) g = g < half ? 0 : 1;
    n_groups = 2;
  }

  SplitPlan plan;
  plan.scheme = scheme;
  plan.n_cases = data.cases.size();
  plan.folds.resize(n_groups);
  for (std::size_t i = 0; i < group.size(); ++i) plan.folds[group[i]].validation.push_back(i);
  return plan;
}

std::vector<std::size_t> SplitPlan::train_indices(std::size_t fold) const {
  const auto& val = folds.at(fold).validation;
  std::vector<std::size_t> out;
  out.reserve(n_cases - val.size());
  std::size_t v = 0;
  for (std::size_t i = 0; i < n_cases; ++i) {
    if (v < val.size() && val[v] == i) ++v;
    else out.push_back(i);
  }
  return out;
}

}  // namespace raincal
