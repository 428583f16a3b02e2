#include "raincal/analogs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "raincal/error.hpp"

namespace raincal {

AnalogWeighting parse_analog_weighting(std::string_view text) {
  if (text == "uniform") return AnalogWeighting::Uniform;
  if (text == "correlation") return AnalogWeighting::Correlation;
  if (text == "vsf") return AnalogWeighting::Vsf;
  throw DomainError("unknown analog weighting '" + std::string(text) + "'");
}

std::string_view to_string(AnalogWeighting w) {
  switch (w) {
    case AnalogWeighting::Uniform: return "uniform";
    case AnalogWeighting::Correlation: return "correlation";
    case AnalogWeighting::Vsf: return "vsf";
  }
  return "?";
}

double analog_distance(std::span<const double> query, std::span<const double> candidate, std::size_t window,
                       std::span<const double> weights, std::span<const double> sigma) {
  const std::size_t p = weights.size();
  if (window == 0 || query.size() != p * window || candidate.size() != p * window || sigma.size() != p)
    throw DomainError("analog distance: block shapes disagree");
  double d = 0.0;
  for (std::size_t j = 0; j < p; ++j) {
    if (weights[j] == 0.0 || sigma[j] <= 0.0) continue;
    double ss = 0.0;
    for (std::size_t i = 0; i < window; ++i) {
      const double f = query[j * window + i];
      const double a = candidate[j * window + i];
      if (std::isnan(f) || std::isnan(a)) throw DataError("analog distance: missing time index");
      ss += (f - a) * (f - a);
    }
    d += weights[j] / sigma[j] * std::sqrt(ss);
  }
  return d;
}

AnalogArchive::AnalogArchive(const Dataset& data, std::span<const std::size_t> station_indices,
                             const PredictorSet& set) {
  rows_.assign(station_indices.begin(), station_indices.end());
  std::stable_sort(rows_.begin(), rows_.end(), [&](auto a, auto b) {
    return data.cases[a].forecast.valid_time < data.cases[b].forecast.valid_time;
  });
  features_ = feature_matrix(data, rows_, set);
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    const auto& c = data.cases[rows_[r]];
    times_.push_back(c.forecast.valid_time);
    obs_.push_back(c.observation);
    by_time_.emplace(c.forecast.valid_time, r);
  }
}

std::optional<std::size_t> AnalogArchive::row_at(Timestamp t) const {
  auto it = by_time_.find(t);
  if (it == by_time_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> AnalogArchive::row_of_case(std::size_t case_index) const {
  auto it = std::find(rows_.begin(), rows_.end(), case_index);
  if (it == rows_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - rows_.begin());
}

std::vector<double> AnalogArchive::predictor_sd(std::span<const std::size_t> rows) const {
  std::vector<double> sd(features_.cols, 0.0);
  if (rows.size() < 2) return sd;
  const auto n = static_cast<double>(rows.size());
  for (std::size_t j = 0; j < features_.cols; ++j) {
    double m = 0.0;
    for (auto r : rows) m += features_.at(r, j);
    m /= n;
    double ss = 0.0;
    for (auto r : rows) ss += (features_.at(r, j) - m) * (features_.at(r, j) - m);
    sd[j] = std::sqrt(ss / (n - 1.0));
  }
  return sd;
}

std::vector<AnalogMatch> find_analogs(const AnalogArchive& archive, std::size_t query_row,
                                      std::span<const std::size_t> candidate_rows, const AnalogConfig& config) {
  return find_analogs(archive, query_row, archive, candidate_rows, config);
}

std::vector<AnalogMatch> find_analogs(const AnalogArchive& queries, std::size_t query_row, const AnalogArchive& archive,
                                      std::span<const std::size_t> candidate_rows, const AnalogConfig& config) {
  const std::size_t n_analogs = config.n_analogs;
  if (queries.features().names != archive.features().names)
    throw DomainError("analogs: query and archive predictors differ");
  const auto& fm = archive.features();
  const std::size_t p = fm.cols;
  if (config.weights.size() != p || config.sigma.size() != p)
    throw DomainError("analogs: weights and sigma must match the archive predictors");
  if (n_analogs == 0) throw DomainError("analogs: n_analogs must be at least 1");
  if (config.t_tilde < 0) throw DomainError("analogs: negative time window");

  const auto step = std::chrono::seconds(static_cast<long long>(std::llround(config.step_hours * 3600.0)));
  const Timestamp t0 = queries.valid_time(query_row);

  // Offsets available around the query.
  std::vector<long long> offsets;
  for (long long o = -config.t_tilde; o <= config.t_tilde; ++o)
    if (queries.row_at(t0 + o * step)) offsets.push_back(o);
  const std::size_t window = offsets.size();

  auto block = [&](const AnalogArchive& source, Timestamp t, std::vector<double>& out) {
    out.assign(p * window, 0.0);
    const auto& f = source.features();
    for (std::size_t i = 0; i < window; ++i) {
      const auto r = source.row_at(t + offsets[i] * step);
      if (!r) return false;
      for (std::size_t j = 0; j < p; ++j) out[j * window + i] = f.at(*r, j);
    }
    return true;
  };

  std::vector<double> query;
  block(queries, t0, query);
  const auto query_day = std::chrono::floor<std::chrono::days>(t0);

  std::vector<AnalogMatch> matches;
  std::vector<double> cand;
  for (auto r : candidate_rows) {
    const auto obs = archive.observation(r);
    if (!obs) continue;
    const Timestamp t = archive.valid_time(r);
    if (std::chrono::floor<std::chrono::days>(t) == query_day) continue;
    if (!block(archive, t, cand)) continue;
    matches.push_back({r, analog_distance(query, cand, window, config.weights, config.sigma), *obs});
  }
  if (matches.size() < n_analogs)
    throw DataError("analogs: insufficient archive (" + std::to_string(matches.size()) + " usable candidates, need " +
                    std::to_string(n_analogs) + ")");
  std::partial_sort(matches.begin(), matches.begin() + static_cast<std::ptrdiff_t>(n_analogs), matches.end(),
                    [&](const AnalogMatch& a, const AnalogMatch& b) {
                      if (a.distance != b.distance) return a.distance < b.distance;
                      return archive.valid_time(a.row) < archive.valid_time(b.row);
                    });
  matches.resize(n_analogs);
  return matches;
}

double pearson_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw DomainError("correlation needs two equal samples of size >= 2");
  const auto n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sab / std::sqrt(saa * sbb);
}

WeightingResult make_weighting(AnalogWeighting mode, const FeatureMatrix& x, std::span<const double> obs,
                               const std::map<std::string, double>& frequencies) {
  if (x.rows == 0) throw DataError("analog weighting: empty training data");
  WeightingResult out;
  out.weights.assign(x.cols, 1.0);
  switch (mode) {
    case AnalogWeighting::Uniform:
      break;
    case AnalogWeighting::Correlation:
      for (std::size_t j = 0; j < x.cols; ++j) {
        const double r = pearson_correlation(x.column(j), obs);
        if (std::isnan(r)) {
          out.weights[j] = 0.0;
          out.warnings.push_back("predictor " + x.names[j] + " is constant; correlation weight set to 0");
        } else {
          out.weights[j] = std::abs(r);
        }
      }
      break;
    case AnalogWeighting::Vsf: {
      if (frequencies.empty()) throw DataError("analog weighting: vsf mode needs selection frequencies");
      double total = 0.0;
      for (std::size_t j = 0; j < x.cols; ++j) {
        auto it = frequencies.find(x.names[j]);
        out.weights[j] = it == frequencies.end() ? 0.0 : it->second;
        total += out.weights[j];
      }
      if (total <= 0.0) throw DataError("analog weighting: no archive predictor was ever selected");
      for (auto& w : out.weights) w /= total;
      break;
    }
  }
  return out;
}

}  // namespace raincal
