#include "raincal/forests.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "raincal/error.hpp"
#include "raincal/parallel.hpp"
#include "raincal/random.hpp"

namespace raincal {

SplitCriterion parse_split_criterion(std::string_view text) {
  if (text == "cart") return SplitCriterion::Cart;
  if (text == "gf") return SplitCriterion::Gradient;
  throw DomainError("unknown split criterion '" + std::string(text) + "'");
}

std::string_view to_string(SplitCriterion c) { return c == SplitCriterion::Cart ? "cart" : "gf"; }

namespace {

double sum_of_squares(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0.0;
  for (double y : v) s += (y - mean) * (y - mean);
  return s;
}

void require_children(std::span<const double> parent, std::span<const double> left, std::span<const double> right) {
  if (left.empty() || right.empty()) throw DomainError("split score: empty child");
  if (left.size() + right.size() != parent.size()) throw DomainError("split score: children do not cover the parent");
}

}  // namespace

double split_score_cart(std::span<const double> parent, std::span<const double> left, std::span<const double> right) {
  require_children(parent, left, right);
  return sum_of_squares(parent) - sum_of_squares(left) - sum_of_squares(right);
}

double lower_quantile(std::span<const double> values, double q) {
  if (values.empty()) throw DomainError("quantile of empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  auto k = static_cast<std::size_t>(std::ceil(q * n - 1e-12));
  k = std::clamp<std::size_t>(k, 1, sorted.size());
  return sorted[k - 1];
}

double split_score_gf(std::span<const double> parent, std::span<const double> left, std::span<const double> right,
                      double q) {
  require_children(parent, left, right);
  if (!(q > 0.0 && q < 1.0)) throw DomainError("split score: quantile order must lie in (0,1)");
  const double theta = lower_quantile(parent, q);
  auto part = [theta](std::span<const double> child) {
    const auto above = static_cast<double>(std::count_if(child.begin(), child.end(), [theta](double y) { return y > theta; }));
    return above * above / static_cast<double>(child.size());
  };
  return part(left) + part(right);
}

// ---------------------------------------------------------------------------
// Split search

namespace {

struct SplitScratch {
  std::vector<std::pair<double, double>> pairs;  // (feature value, label)
};

// Scans one feature. `labels` holds y for CART and rho for GF.
void scan_feature(const FeatureMatrix& x, std::span<const std::size_t> rows, std::span<const double> labels,
                  std::size_t feature, SplitCriterion criterion, double total, double baseline,
                  std::optional<SplitCandidate>& best, SplitScratch& scratch) {
  auto& pairs = scratch.pairs;
  pairs.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) pairs[i] = {x.at(rows[i], feature), labels[i]};
  std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  if (pairs.front().first == pairs.back().first) return;

  const auto n = static_cast<double>(pairs.size());
  double left_sum = 0.0;
  for (std::size_t i = 0; i + 1 < pairs.size(); ++i) {
    left_sum += pairs[i].second;
    if (pairs[i].first == pairs[i + 1].first) continue;
    const double n_left = static_cast<double>(i + 1);
    const double n_right = n - n_left;
    const double right_sum = total - left_sum;
    const double score = left_sum * left_sum / n_left + right_sum * right_sum / n_right - (criterion == SplitCriterion::Cart ? baseline : 0.0);
    const double gain = criterion == SplitCriterion::Cart ? score : score - baseline;
    // Scores equal up to rounding count as ties so the first candidate is kept.
    if (!best || score > best->score + 1e-12 * (1.0 + std::abs(best->score))) {
      best = SplitCandidate{feature, 0.5 * (pairs[i].first + pairs[i + 1].first), score, gain};
    }
  }
}

std::optional<SplitCandidate> find_split(const FeatureMatrix& x, std::span<const double> y,
                                         std::span<const std::size_t> rows, std::span<const std::size_t> features,
                                         SplitCriterion criterion, double q, SplitScratch& scratch,
                                         std::vector<double>& labels) {
  labels.resize(rows.size());
  if (criterion == SplitCriterion::Cart) {
    for (std::size_t i = 0; i < rows.size(); ++i) labels[i] = y[rows[i]];
  } else {
    for (std::size_t i = 0; i < rows.size(); ++i) labels[i] = y[rows[i]];
    const double theta = lower_quantile(labels, q);
    for (auto& l : labels) l = l > theta ? 1.0 : 0.0;
  }
  double total = 0.0;
  for (double l : labels) total += l;
  const double baseline = total * total / static_cast<double>(rows.size());

  std::optional<SplitCandidate> best;
  for (auto f : features) scan_feature(x, rows, labels, f, criterion, total, baseline, best, scratch);
  return best;
}

}  // namespace

std::optional<SplitCandidate> best_split(const FeatureMatrix& x, std::span<const double> y,
                                         std::span<const std::size_t> rows, std::span<const std::size_t> features,
                                         SplitCriterion criterion, double q) {
  if (rows.size() < 2) return std::nullopt;
  SplitScratch scratch;
  std::vector<double> labels;
  return find_split(x, y, rows, features, criterion, q, scratch, labels);
}

// ---------------------------------------------------------------------------
// Trees

std::size_t Tree::leaf_of(std::span<const double> x) const {
  std::size_t node = 0;
  while (nodes[node].feature >= 0) {
    const auto& n = nodes[node];
    node = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.cut ? n.left : n.right);
  }
  return static_cast<std::size_t>(nodes[node].leaf);
}

namespace {

Tree grow_tree(const FeatureMatrix& x, std::span<const double> y, const ForestConfig& cfg, std::size_t mtry,
               std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = y.size();
  const auto n_sample = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.sample_fraction * static_cast<double>(n))));

  std::vector<std::size_t> sample;
  sample.reserve(n_sample);
  if (cfg.replace) {
    for (std::size_t i = 0; i < n_sample; ++i) sample.push_back(uniform_index(rng, n));
  } else {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    for (std::size_t i = 0; i < std::min(n_sample, n); ++i) {
      std::swap(all[i], all[i + uniform_index(rng, n - i)]);
      sample.push_back(all[i]);
    }
  }

  Tree tree;
  struct Pending {
    std::size_t node, begin, end;
  };
  std::vector<Pending> stack;
  tree.nodes.emplace_back();
  stack.push_back({0, 0, sample.size()});

  std::vector<std::size_t> feature_pool(x.cols);
  std::vector<std::size_t> chosen;
  SplitScratch scratch;
  std::vector<double> labels;

  auto make_leaf = [&](std::size_t node, std::size_t begin, std::size_t end) {
    tree.nodes[node].leaf = static_cast<std::int32_t>(tree.leaves.size());
    std::vector<std::uint32_t> members;
    members.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) members.push_back(static_cast<std::uint32_t>(sample[i]));
    tree.leaves.push_back(std::move(members));
  };

  while (!stack.empty()) {
    const auto [node, begin, end] = stack.back();
    stack.pop_back();
    const std::size_t size = end - begin;
    if (size < 2 * cfg.min_node_size || size < 2) {
      make_leaf(node, begin, end);
      continue;
    }

    std::iota(feature_pool.begin(), feature_pool.end(), 0);
    chosen.clear();
    for (std::size_t i = 0; i < mtry; ++i) {
      std::swap(feature_pool[i], feature_pool[i + uniform_index(rng, x.cols - i)]);
      chosen.push_back(feature_pool[i]);
    }
    double q = 0.5;
    if (cfg.criterion == SplitCriterion::Gradient) q = cfg.gf_orders[uniform_index(rng, cfg.gf_orders.size())];

    const std::span<const std::size_t> rows(sample.data() + begin, size);
    const auto split = find_split(x, y, rows, chosen, cfg.criterion, q, scratch, labels);
    const double scale = 1e-12 * (1.0 + (split ? std::abs(split->score) : 0.0));
    if (!split || split->gain <= scale) {
      make_leaf(node, begin, end);
      continue;
    }

    const auto mid = std::partition(sample.begin() + static_cast<std::ptrdiff_t>(begin),
                                    sample.begin() + static_cast<std::ptrdiff_t>(end),
                                    [&](std::size_t r) { return x.at(r, split->feature) <= split->cut; });
    const auto mid_pos = static_cast<std::size_t>(mid - sample.begin());

    const auto left = tree.nodes.size();
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    auto& parent = tree.nodes[node];
    parent.feature = static_cast<std::int32_t>(split->feature);
    parent.cut = split->cut;
    parent.left = static_cast<std::int32_t>(left);
    parent.right = static_cast<std::int32_t>(left + 1);
    // Right child pushed first so the left subtree is built first.
    stack.push_back({left + 1, mid_pos, end});
    stack.push_back({left, begin, mid_pos});
  }
  return tree;
}

}  // namespace

Forest Forest::grow(const FeatureMatrix& x, std::span<const double> y, const ForestConfig& config) {
  if (x.rows != y.size()) throw DomainError("forest: feature rows and responses differ in length");
  if (x.cols == 0) throw DomainError("forest: no predictors");
  if (config.n_trees < 1) throw DomainError("forest: n_trees must be at least 1");
  if (config.min_node_size < 1) throw DomainError("forest: min_node_size must be at least 1");
  if (y.size() < config.min_node_size) throw DomainError("forest: fewer training rows than min_node_size");
  if (config.criterion == SplitCriterion::Gradient) {
    if (config.gf_orders.empty()) throw DomainError("forest: no quantile orders for the gradient criterion");
    for (double q : config.gf_orders)
      if (!(q > 0.0 && q < 1.0)) throw DomainError("forest: quantile orders must lie in (0,1)");
  }
  const std::size_t mtry = config.mtry == 0 ? (x.cols + 2) / 3 : config.mtry;
  if (mtry > x.cols) throw DomainError("forest: mtry exceeds the number of predictors");

  Forest f;
  f.config_ = config;
  f.config_.mtry = mtry;
  f.names_ = x.names;
  f.responses_.assign(y.begin(), y.end());
  f.trees_.resize(config.n_trees);
  parallel_for(config.n_trees, config.jobs,
               [&](std::size_t t) { f.trees_[t] = grow_tree(x, y, config, mtry, derive_seed(config.seed, t)); });
  f.index_responses();
  return f;
}

void Forest::index_responses() {
  std::vector<std::uint32_t> order(responses_.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return responses_[a] < responses_[b]; });
  rank_.assign(responses_.size(), 0);
  for (std::uint32_t r = 0; r < order.size(); ++r) rank_[order[r]] = r;
}

std::vector<double> Forest::training_weights(std::span<const double> x) const {
  if (x.size() != names_.size()) throw DomainError("forest: feature vector has the wrong length");
  std::vector<double> w(responses_.size(), 0.0);
  const double per_tree = 1.0 / static_cast<double>(trees_.size());
  for (const auto& tree : trees_) {
    const auto& leaf = tree.leaves[tree.leaf_of(x)];
    const double share = per_tree / static_cast<double>(leaf.size());
    for (auto i : leaf) w[i] += share;
  }
  return w;
}

WeightedEcdf Forest::weights(std::span<const double> x) const {
  if (x.size() != names_.size()) throw DomainError("forest: feature vector has the wrong length");
  thread_local std::vector<double> dense;
  thread_local std::vector<std::uint32_t> touched;
  dense.assign(responses_.size(), 0.0);
  touched.clear();
  const double per_tree = 1.0 / static_cast<double>(trees_.size());
  for (const auto& tree : trees_) {
    const auto& leaf = tree.leaves[tree.leaf_of(x)];
    const double share = per_tree / static_cast<double>(leaf.size());
    for (auto i : leaf) {
      if (dense[i] == 0.0) touched.push_back(i);
      dense[i] += share;
    }
  }
  std::sort(touched.begin(), touched.end(), [this](auto a, auto b) { return rank_[a] < rank_[b]; });

  WeightedEcdf e;
  double total = 0.0;
  for (auto i : touched) {
    const double v = responses_[i];
    if (!e.values.empty() && e.values.back() == v) {
      e.weights.back() += dense[i];
    } else {
      e.values.push_back(v);
      e.weights.push_back(dense[i]);
    }
    total += dense[i];
  }
  for (auto& w : e.weights) w /= total;
  return e;
}

WeightedEcdf Forest::weights(std::span<const std::string> names, std::span<const double> values) const {
  if (names.size() != values.size()) throw DomainError("forest: names and values differ in length");
  std::vector<double> x(names_.size());
  for (std::size_t j = 0; j < names_.size(); ++j) {
    auto it = std::find(names.begin(), names.end(), names_[j]);
    if (it == names.end()) throw DataError("forest: predictor '" + names_[j] + "' missing from the query");
    x[j] = values[static_cast<std::size_t>(it - names.begin())];
  }
  return weights(x);
}

std::vector<double> Forest::permutation_importance(const FeatureMatrix& x, std::span<const double> y,
                                                   std::uint64_t seed) const {
  if (x.rows != responses_.size() || x.cols != names_.size())
    throw DomainError("permutation importance needs the training matrix");
  std::vector<double> importance(x.cols, 0.0);
  std::vector<double> row(x.cols);
  std::size_t used_trees = 0;
  for (std::size_t t = 0; t < trees_.size(); ++t) {
    const auto& tree = trees_[t];
    std::vector<char> in_bag(x.rows, 0);
    std::vector<double> leaf_mean(tree.leaves.size());
    for (std::size_t l = 0; l < tree.leaves.size(); ++l) {
      double s = 0.0;
      for (auto i : tree.leaves[l]) {
        in_bag[i] = 1;
        s += y[i];
      }
      leaf_mean[l] = s / static_cast<double>(tree.leaves[l].size());
    }
    std::vector<std::size_t> oob;
    for (std::size_t i = 0; i < x.rows; ++i)
      if (!in_bag[i]) oob.push_back(i);
    if (oob.size() < 2) continue;
    ++used_trees;

    double base = 0.0;
    for (auto i : oob) {
      const double e = y[i] - leaf_mean[tree.leaf_of(x.row(i))];
      base += e * e;
    }
    Rng rng(derive_seed(seed, t));
    std::vector<std::size_t> perm(oob);
    for (std::size_t j = 0; j < x.cols; ++j) {
      for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[uniform_index(rng, i)]);
      double permuted = 0.0;
      for (std::size_t k = 0; k < oob.size(); ++k) {
        const auto r = x.row(oob[k]);
        std::copy(r.begin(), r.end(), row.begin());
        row[j] = x.at(perm[k], j);
        const double e = y[oob[k]] - leaf_mean[tree.leaf_of(row)];
        permuted += e * e;
      }
      importance[j] += (permuted - base) / static_cast<double>(oob.size());
    }
  }
  if (used_trees > 0)
    for (auto& v : importance) v /= static_cast<double>(used_trees);
  return importance;
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json Forest::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : trees_) {
    std::vector<std::int32_t> feature, left, right, leaf;
    std::vector<double> cut;
    for (const auto& n : t.nodes) {
      feature.push_back(n.feature);
      cut.push_back(n.cut);
      left.push_back(n.left);
      right.push_back(n.right);
      leaf.push_back(n.leaf);
    }
    trees.push_back({{"feature", feature}, {"cut", cut}, {"left", left}, {"right", right}, {"leaf", leaf},
                     {"leaves", t.leaves}});
  }
  return {{"format", "raincal-forest"},
          {"version", 1},
          {"criterion", to_string(config_.criterion)},
          {"config",
           {{"n_trees", config_.n_trees},
            {"mtry", config_.mtry},
            {"min_node_size", config_.min_node_size},
            {"sample_fraction", config_.sample_fraction},
            {"replace", config_.replace},
            {"gf_orders", config_.gf_orders},
            {"seed", config_.seed}}},
          {"predictors", names_},
          {"responses", responses_},
          {"trees", trees}};
}

Forest Forest::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "raincal-forest") throw DataError("not a forest file");
  if (j.value("version", 0) != 1) throw DataError("unsupported forest format version");
  Forest f;
  const auto& c = j.at("config");
  f.config_.criterion = parse_split_criterion(j.at("criterion").get<std::string>());
  f.config_.n_trees = c.at("n_trees");
  f.config_.mtry = c.at("mtry");
  f.config_.min_node_size = c.at("min_node_size");
  f.config_.sample_fraction = c.at("sample_fraction");
  f.config_.replace = c.at("replace");
  f.config_.gf_orders = c.at("gf_orders").get<std::vector<double>>();
  f.config_.seed = c.at("seed");
  f.names_ = j.at("predictors").get<std::vector<std::string>>();
  f.responses_ = j.at("responses").get<std::vector<double>>();
  for (const auto& jt : j.at("trees")) {
    Tree t;
    const auto feature = jt.at("feature").get<std::vector<std::int32_t>>();
    const auto cut = jt.at("cut").get<std::vector<double>>();
    const auto left = jt.at("left").get<std::vector<std::int32_t>>();
    const auto right = jt.at("right").get<std::vector<std::int32_t>>();
    const auto leaf = jt.at("leaf").get<std::vector<std::int32_t>>();
    for (std::size_t i = 0; i < feature.size(); ++i) t.nodes.push_back({feature[i], cut[i], left[i], right[i], leaf[i]});
    t.leaves = jt.at("leaves").get<std::vector<std::vector<std::uint32_t>>>();
    f.trees_.push_back(std::move(t));
  }
  if (f.trees_.size() != f.config_.n_trees) throw DataError("forest file: tree count mismatch");
  f.index_responses();
  return f;
}

}  // namespace raincal
