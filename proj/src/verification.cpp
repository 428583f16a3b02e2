#include "raincal/verification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "raincal/core.hpp"
#include "raincal/error.hpp"
#include "raincal/parallel.hpp"
#include "raincal/special.hpp"

namespace raincal {

double crpss(double method_crps, double baseline_crps) {
  if (!(baseline_crps > 0.0)) throw DomainError("CRPSS: baseline CRPS must be positive");
  return 1.0 - method_crps / baseline_crps;
}

std::size_t rank_of_obs(std::span<const double> members, double y, Rng& rng) {
  std::size_t below = 0;
  std::size_t ties = 0;
  for (double x : members) {
    if (x < y) ++below;
    else if (x == y) ++ties;
  }
  return below + 1 + static_cast<std::size_t>(uniform_index(rng, ties + 1));
}

double pit_value(double cdf_left, double cdf, Rng& rng) {
  const double u = uniform01(rng);
  if (cdf <= cdf_left) return cdf;
  return cdf_left + u * (cdf - cdf_left);
}

double pit_value(const PredictiveDistribution& pred, double y, Rng& rng) {
  return pit_value(predictive_cdf_left(pred, y), predictive_cdf(pred, y), rng);
}

std::size_t rank_of_prediction(const PredictiveDistribution& pred, double y, std::size_t k, Rng& rng) {
  if (const auto* e = std::get_if<Ensemble>(&pred); e && e->members.size() == k) return rank_of_obs(e->members, y, rng);
  const double u = pit_value(pred, y, rng);
  const auto bin = static_cast<std::size_t>(std::floor(u * static_cast<double>(k + 1)));
  return std::min(bin, k) + 1;
}

RankHistogram RankHistogram::from_ranks(std::span<const std::size_t> ranks, std::size_t k) {
  RankHistogram h;
  h.counts.assign(k + 1, 0);
  for (auto r : ranks) {
    if (r < 1 || r > k + 1) throw DomainError("rank outside 1..K+1");
    ++h.counts[r - 1];
  }
  return h;
}

std::size_t RankHistogram::n_cases() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

std::vector<double> RankHistogram::frequencies() const {
  const auto n = static_cast<double>(n_cases());
  std::vector<double> f(counts.size(), 0.0);
  if (n == 0.0) return f;
  for (std::size_t i = 0; i < counts.size(); ++i) f[i] = static_cast<double>(counts[i]) / n;
  return f;
}

HistogramStats histogram_stats(const RankHistogram& h) {
  const std::size_t k = h.k();
  if (k == 0 || h.n_cases() == 0) throw DomainError("histogram statistics need K >= 1 and at least one case");
  const auto f = h.frequencies();
  const auto kd = static_cast<double>(k);
  HistogramStats s;
  for (std::size_t i = 0; i <= k; ++i) s.ez += f[i] * static_cast<double>(i) / kd;
  double var = 0.0;
  for (std::size_t i = 0; i <= k; ++i) {
    const double d = static_cast<double>(i) / kd - s.ez;
    var += f[i] * d * d;
  }
  s.vz = 12.0 * kd / (kd + 2.0) * var;
  double entropy = 0.0;
  for (double fi : f)
    if (fi > 0.0) entropy -= fi * std::log(fi);
  s.omega = entropy / std::log(kd + 1.0);
  return s;
}

FlatnessTest flatness_test(const RankHistogram& h, double alpha) {
  const std::size_t bins = h.counts.size();
  const std::size_t n = h.n_cases();
  if (bins < 2 || n == 0) throw DomainError("flatness test needs K >= 1 and at least one case");
  FlatnessTest t;
  t.alpha = alpha;
  t.small_sample = n < 10 * bins;

  const double expected = static_cast<double>(n) / static_cast<double>(bins);
  std::vector<double> d(bins);
  double chi2 = 0.0;
  for (std::size_t i = 0; i < bins; ++i) {
    d[i] = (static_cast<double>(h.counts[i]) - expected) / std::sqrt(expected);
    chi2 += d[i] * d[i];
  }

  const double centre = 0.5 * static_cast<double>(bins - 1);
  std::vector<double> lin(bins), quad(bins);
  for (std::size_t i = 0; i < bins; ++i) {
    const double x = static_cast<double>(i) - centre;
    lin[i] = x;
    quad[i] = x * x;
  }
  const double quad_mean = std::accumulate(quad.begin(), quad.end(), 0.0) / static_cast<double>(bins);
  for (auto& q : quad) q -= quad_mean;
  auto project = [&](std::vector<double>& c) {
    const double norm = std::sqrt(std::inner_product(c.begin(), c.end(), c.begin(), 0.0));
    if (norm == 0.0) return 0.0;
    const double dot = std::inner_product(c.begin(), c.end(), d.begin(), 0.0) / norm;
    return dot * dot;
  };

  const double level = alpha / 3.0;
  t.slope = project(lin);
  t.p_slope = chi_square_sf(t.slope, 1.0);
  bool reject = t.p_slope < level;
  if (bins >= 3) {
    t.convexity = project(quad);
    t.p_convexity = chi_square_sf(t.convexity, 1.0);
    reject = reject || t.p_convexity < level;
  }
  if (bins >= 4) {
    t.residual_df = bins - 3;
    t.residual = std::max(0.0, chi2 - t.slope - t.convexity);
    t.p_residual = chi_square_sf(t.residual, static_cast<double>(t.residual_df));
    reject = reject || t.p_residual < level;
  }
  t.reject = reject;
  return t;
}

RocCurve roc_curve(std::span<const double> probabilities, std::span<const char> events) {
  std::vector<double> sweep(probabilities.begin(), probabilities.end());
  sweep.push_back(0.0);
  sweep.push_back(1.0);
  return roc_curve(probabilities, events, std::move(sweep));
}

RocCurve roc_curve(std::span<const double> probabilities, std::span<const char> events, std::vector<double> sweep) {
  if (probabilities.size() != events.size()) throw DomainError("ROC: forecasts and outcomes differ in length");
  const auto positives = static_cast<std::size_t>(std::count_if(events.begin(), events.end(), [](char e) { return e != 0; }));
  const std::size_t negatives = events.size() - positives;
  if (positives == 0 || negatives == 0) throw DomainError("ROC: outcomes are all of one class");

  std::sort(sweep.begin(), sweep.end(), std::greater<>());
  sweep.erase(std::unique(sweep.begin(), sweep.end()), sweep.end());

  // Cases sorted by decreasing probability; walking the sweep admits them in order.
  std::vector<std::size_t> order(probabilities.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return probabilities[a] > probabilities[b]; });

  RocCurve c;
  c.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::size_t hits = 0, false_alarms = 0, next = 0;
  for (double t : sweep) {
    while (next < order.size() && probabilities[order[next]] >= t) {
      if (events[order[next]]) ++hits;
      else ++false_alarms;
      ++next;
    }
    c.points.push_back({t, static_cast<double>(false_alarms) / static_cast<double>(negatives),
                        static_cast<double>(hits) / static_cast<double>(positives)});
  }
  if (c.points.back().false_alarm < 1.0 || c.points.back().hit < 1.0)
    c.points.push_back({-std::numeric_limits<double>::infinity(), 1.0, 1.0});

  c.peirce_max = -1.0;
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    const auto& p = c.points[i];
    if (i > 0) {
      const auto& q = c.points[i - 1];
      c.auc += 0.5 * (p.false_alarm - q.false_alarm) * (p.hit + q.hit);
    }
    if (p.hit - p.false_alarm > c.peirce_max) {
      c.peirce_max = p.hit - p.false_alarm;
      c.peirce_threshold = p.threshold;
    }
  }
  return c;
}

Interval bootstrap_mean_ci(std::span<const double> values, std::size_t replicates, double level, std::uint64_t seed) {
  if (values.empty()) throw DomainError("bootstrap of an empty sample");
  if (replicates == 0) {
    const double m = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    return {m, m};
  }
  Rng rng(seed);
  std::vector<double> means(replicates);
  for (auto& m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += values[uniform_index(rng, values.size())];
    m = s / static_cast<double>(values.size());
  }
  std::sort(means.begin(), means.end());
  auto at = [&](double q) {
    const double h = q * static_cast<double>(replicates - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, replicates - 1);
    return means[lo] + (h - static_cast<double>(lo)) * (means[hi] - means[lo]);
  };
  return {at(0.5 * (1.0 - level)), at(0.5 * (1.0 + level))};
}

ScoreReport score_predictions(std::string method, std::span<const PredictiveDistribution> predictions,
                              std::span<const double> observations, const ReportConfig& config,
                              std::optional<double> baseline_crps) {
  if (predictions.size() != observations.size()) throw DomainError("scoring: predictions and observations differ in length");
  if (predictions.empty()) throw DomainError("scoring: no cases");
  const std::size_t n = predictions.size();
  const std::size_t n_roc = config.roc_thresholds.size();

  ScoreReport r;
  r.method = std::move(method);
  r.n_cases = n;
  r.crps.assign(n, 0.0);
  std::vector<std::size_t> ranks(n);
  std::vector<double> probs(n * n_roc);
  parallel_for(n, config.jobs, [&](std::size_t i) {
    Rng rng(derive_seed(config.seed, i));
    r.crps[i] = crps_of_predictive(predictions[i], observations[i]);
    ranks[i] = rank_of_prediction(predictions[i], observations[i], config.k, rng);
    for (std::size_t t = 0; t < n_roc; ++t)
      probs[t * n + i] = 1.0 - predictive_cdf(predictions[i], config.roc_thresholds[t]);
  });

  r.mean_crps = std::accumulate(r.crps.begin(), r.crps.end(), 0.0) / static_cast<double>(n);
  r.crps_ci = bootstrap_mean_ci(r.crps, config.bootstrap, config.level, derive_seed(config.seed, 0xb007));
  r.histogram = RankHistogram::from_ranks(ranks, config.k);
  r.stats = histogram_stats(r.histogram);
  r.flatness = flatness_test(r.histogram, config.alpha);

  for (std::size_t t = 0; t < n_roc; ++t) {
    RocSummary s;
    s.event_threshold = config.roc_thresholds[t];
    std::vector<char> events(n);
    for (std::size_t i = 0; i < n; ++i) events[i] = observations[i] > s.event_threshold ? 1 : 0;
    s.n_events = static_cast<std::size_t>(std::count(events.begin(), events.end(), 1));
    if (s.n_events > 0 && s.n_events < n) {
      s.curve = roc_curve(std::span<const double>(probs.data() + t * n, n), events);
      s.defined = true;
      s.auc = s.curve.auc;
      s.peirce_max = s.curve.peirce_max;
      s.peirce_threshold = s.curve.peirce_threshold;
    }
    r.roc.push_back(std::move(s));
  }
  if (baseline_crps) attach_baseline(r, *baseline_crps);
  return r;
}

void attach_baseline(ScoreReport& report, double baseline_crps) {
  report.baseline_crps = baseline_crps;
  report.crpss = crpss(report.mean_crps, baseline_crps);
}

namespace {

nlohmann::json number_or_null(std::optional<double> v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

}  // namespace

nlohmann::json ScoreReport::to_json() const {
  nlohmann::json roc_json = nlohmann::json::array();
  for (const auto& s : roc) {
    roc_json.push_back({{"event_threshold", s.event_threshold},
                        {"n_events", s.n_events},
                        {"defined", s.defined},
                        {"auc", s.defined ? nlohmann::json(s.auc) : nlohmann::json(nullptr)},
                        {"peirce_max", s.defined ? nlohmann::json(s.peirce_max) : nlohmann::json(nullptr)},
                        {"peirce_threshold", number_or_null(s.defined ? std::optional(s.peirce_threshold) : std::nullopt)}});
  }
  return {{"method", method},
          {"n_cases", n_cases},
          {"mean_crps", mean_crps},
          {"crps_ci", {crps_ci.low, crps_ci.high}},
          {"baseline_crps", number_or_null(baseline_crps)},
          {"crpss", number_or_null(crpss)},
          {"ez", stats.ez},
          {"vz", stats.vz},
          {"omega", stats.omega},
          {"flatness",
           {{"slope", flatness.slope},
            {"p_slope", flatness.p_slope},
            {"convexity", flatness.convexity},
            {"p_convexity", flatness.p_convexity},
            {"residual", flatness.residual},
            {"residual_df", flatness.residual_df},
            {"p_residual", flatness.p_residual},
            {"alpha", flatness.alpha},
            {"reject", flatness.reject},
            {"small_sample", flatness.small_sample}}},
          {"rank_histogram", histogram.counts},
          {"roc", roc_json}};
}

std::vector<std::string> summary_columns(const ReportConfig& config) {
  std::vector<std::string> cols = {"method", "n_cases", "mean_crps", "crps_ci_low", "crps_ci_high", "baseline_crps",
                                   "crpss", "ez", "vz", "omega", "flat_slope", "flat_p_slope", "flat_convexity",
                                   "flat_p_convexity", "flat_residual", "flat_p_residual", "flat_reject"};
  for (double t : config.roc_thresholds) {
    const auto s = format_number(t);
    cols.push_back("auc_" + s);
    cols.push_back("peirce_max_" + s);
  }
  return cols;
}

void write_summary_csv(std::ostream& out, std::span<const ScoreReport> reports, const ReportConfig& config) {
  const auto cols = summary_columns(config);
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  auto opt = [](std::optional<double> v) { return v ? format_number(*v) : std::string("NA"); };
  for (const auto& r : reports) {
    out << r.method << ',' << r.n_cases << ',' << format_number(r.mean_crps) << ',' << format_number(r.crps_ci.low)
        << ',' << format_number(r.crps_ci.high) << ',' << opt(r.baseline_crps) << ',' << opt(r.crpss) << ','
        << format_number(r.stats.ez) << ',' << format_number(r.stats.vz) << ',' << format_number(r.stats.omega) << ','
        << format_number(r.flatness.slope) << ',' << format_number(r.flatness.p_slope) << ','
        << format_number(r.flatness.convexity) << ',' << format_number(r.flatness.p_convexity) << ','
        << format_number(r.flatness.residual) << ',' << format_number(r.flatness.p_residual) << ','
        << (r.flatness.reject ? "true" : "false");
    for (double t : config.roc_thresholds) {
      auto it = std::find_if(r.roc.begin(), r.roc.end(), [t](const RocSummary& s) { return s.event_threshold == t; });
      if (it == r.roc.end() || !it->defined) {
        out << ",NA,NA";
      } else {
        out << ',' << format_number(it->auc) << ',' << format_number(it->peirce_max);
      }
    }
    out << '\n';
  }
}

void write_rank_histogram_csv(std::ostream& out, const ScoreReport& report) {
  out << "method,rank,count,frequency\n";
  const auto f = report.histogram.frequencies();
  for (std::size_t i = 0; i < report.histogram.counts.size(); ++i)
    out << report.method << ',' << i + 1 << ',' << report.histogram.counts[i] << ',' << format_number(f[i]) << '\n';
}

void write_roc_csv(std::ostream& out, const ScoreReport& report) {
  out << "method,event_threshold,decision_threshold,false_alarm_rate,hit_rate\n";
  for (const auto& s : report.roc) {
    if (!s.defined) continue;
    for (const auto& p : s.curve.points) {
      const std::string t = std::isinf(p.threshold) ? (p.threshold > 0 ? "inf" : "-inf") : format_number(p.threshold);
      out << report.method << ',' << format_number(s.event_threshold) << ',' << t << ','
          << format_number(p.false_alarm) << ',' << format_number(p.hit) << '\n';
    }
  }
}

}  // namespace raincal
