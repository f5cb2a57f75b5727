#include "seedmix/yield_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "seedmix/errors.hpp"
#include "seedmix/forecast.hpp"
#include "seedmix/parallel.hpp"
#include "seedmix/random.hpp"

namespace seedmix {
namespace {

constexpr int kForestVersion = 1;

struct TrainingSet {
  std::vector<FeatureRow> rows;
  std::vector<int> labels;
  std::size_t n_classes = 0;
  std::size_t n_categories = 0;
};

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  int category = -1;
  double impurity = 0.0;  // weighted child impurity
};

double gini_from_sumsq(double sumsq, double n) { return 1.0 - sumsq / (n * n); }

class TreeBuilder {
 public:
  TreeBuilder(const TrainingSet& data, const ForestConfig& config, std::size_t mtry,
              std::uint64_t seed)
      : data_(data), config_(config), mtry_(mtry), rng_(seed) {}

  DecisionTree build(std::vector<std::size_t> samples) {
    tree_.nodes.clear();
    grow(std::move(samples));
    return std::move(tree_);
  }

 private:
  int grow(std::vector<std::size_t> samples) {
    const int node_id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.push_back(TreeNode{});

    std::vector<std::size_t> counts(data_.n_classes, 0);
    for (std::size_t s : samples) ++counts[static_cast<std::size_t>(data_.labels[s])];
    const auto majority = static_cast<int>(
        std::max_element(counts.begin(), counts.end()) - counts.begin());
    tree_.nodes[static_cast<std::size_t>(node_id)].label = majority;

    const auto n = static_cast<double>(samples.size());
    double sumsq = 0.0;
    std::size_t nonzero = 0;
    for (std::size_t c : counts) {
      sumsq += static_cast<double>(c * c);
      nonzero += c > 0 ? 1 : 0;
    }
    if (nonzero <= 1 || samples.size() < 2 * config_.min_leaf) return node_id;
    const double parent = gini_from_sumsq(sumsq, n);

    const auto split = find_split(samples, parent);
    if (split.feature < 0) return node_id;

    std::vector<std::size_t> left, right;
    for (std::size_t s : samples) {
      (goes_left(split, data_.rows[s]) ? left : right).push_back(s);
    }
    samples.clear();
    samples.shrink_to_fit();
    {
      TreeNode& node = tree_.nodes[static_cast<std::size_t>(node_id)];
      node.feature = split.feature;
      node.threshold = split.threshold;
      node.category = split.category;
    }
    const int l = grow(std::move(left));
    const int r = grow(std::move(right));
    tree_.nodes[static_cast<std::size_t>(node_id)].left = l;
    tree_.nodes[static_cast<std::size_t>(node_id)].right = r;
    return node_id;
  }

  static bool goes_left(const SplitChoice& split, const FeatureRow& row) {
    if (split.feature == kVarietyFeature) return row.variety == split.category;
    return row.numeric[static_cast<std::size_t>(split.feature)] <= split.threshold;
  }

  // Candidate features in random order; the first mtry are always examined and
  // the search continues past them only while no valid split has been found.
  SplitChoice find_split(const std::vector<std::size_t>& samples, double parent) {
    std::vector<int> features(kFeatureCount);
    std::iota(features.begin(), features.end(), 0);
    rng_.shuffle(features);

    SplitChoice best;
    best.impurity = parent;
    for (std::size_t k = 0; k < features.size(); ++k) {
      if (k >= mtry_ && best.feature >= 0) break;
      const int f = features[k];
      if (f == kVarietyFeature) {
        best_categorical(samples, best);
      } else {
        best_numeric(samples, f, best);
      }
    }
    // Require a strict impurity decrease.
    if (best.feature >= 0 && !(best.impurity < parent - 1e-12)) best.feature = -1;
    return best;
  }

  void best_numeric(const std::vector<std::size_t>& samples, int feature, SplitChoice& best) {
    const auto f = static_cast<std::size_t>(feature);
    std::vector<std::pair<double, int>> values;
    values.reserve(samples.size());
    for (std::size_t s : samples) values.emplace_back(data_.rows[s].numeric[f], data_.labels[s]);
    std::sort(values.begin(), values.end());

    const std::size_t n = values.size();
    std::vector<std::size_t> left(data_.n_classes, 0), right(data_.n_classes, 0);
    for (const auto& v : values) ++right[static_cast<std::size_t>(v.second)];
    double sumsq_left = 0.0;
    double sumsq_right = 0.0;
    for (std::size_t c : right) sumsq_right += static_cast<double>(c * c);

    for (std::size_t i = 0; i + 1 < n; ++i) {
      const auto label = static_cast<std::size_t>(values[i].second);
      sumsq_left += 2.0 * static_cast<double>(left[label]) + 1.0;
      sumsq_right -= 2.0 * static_cast<double>(right[label]) - 1.0;
      ++left[label];
      --right[label];
      const std::size_t n_left = i + 1;
      const std::size_t n_right = n - n_left;
      if (n_left < config_.min_leaf || n_right < config_.min_leaf) continue;
      if (!(values[i].first < values[i + 1].first)) continue;
      const double nl = static_cast<double>(n_left);
      const double nr = static_cast<double>(n_right);
      const double impurity = (nl * gini_from_sumsq(sumsq_left, nl) +
                               nr * gini_from_sumsq(sumsq_right, nr)) /
                              static_cast<double>(n);
      if (impurity < best.impurity - 1e-15 || best.feature < 0) {
        double threshold = values[i].first + (values[i + 1].first - values[i].first) / 2.0;
        if (!(threshold < values[i + 1].first)) threshold = values[i].first;
        best = SplitChoice{feature, threshold, -1, impurity};
      }
    }
  }

  void best_categorical(const std::vector<std::size_t>& samples, SplitChoice& best) {
    const std::size_t classes = data_.n_classes;
    std::vector<std::size_t> table(data_.n_categories * classes, 0);
    std::vector<std::size_t> totals(classes, 0);
    std::vector<std::size_t> per_category(data_.n_categories, 0);
    for (std::size_t s : samples) {
      const auto cat = static_cast<std::size_t>(data_.rows[s].variety);
      const auto label = static_cast<std::size_t>(data_.labels[s]);
      ++table[cat * classes + label];
      ++totals[label];
      ++per_category[cat];
    }
    const std::size_t n = samples.size();
    for (std::size_t cat = 0; cat < data_.n_categories; ++cat) {
      const std::size_t n_left = per_category[cat];
      const std::size_t n_right = n - n_left;
      if (n_left < config_.min_leaf || n_right < config_.min_leaf) continue;
      double sumsq_left = 0.0;
      double sumsq_right = 0.0;
      for (std::size_t c = 0; c < classes; ++c) {
        const auto l = static_cast<double>(table[cat * classes + c]);
        const auto r = static_cast<double>(totals[c]) - l;
        sumsq_left += l * l;
        sumsq_right += r * r;
      }
      const double nl = static_cast<double>(n_left);
      const double nr = static_cast<double>(n_right);
      const double impurity = (nl * gini_from_sumsq(sumsq_left, nl) +
                               nr * gini_from_sumsq(sumsq_right, nr)) /
                              static_cast<double>(n);
      if (impurity < best.impurity - 1e-15 || best.feature < 0) {
        best = SplitChoice{kVarietyFeature, 0.0, static_cast<int>(cat), impurity};
      }
    }
  }

  const TrainingSet& data_;
  const ForestConfig& config_;
  std::size_t mtry_;
  Rng rng_;
  DecisionTree tree_;
};

}  // namespace

double BinScheme::midpoint(std::size_t bin) const {
  return lo + (static_cast<double>(bin) + 0.5) * width();
}

BinScheme make_bins(double lo, double hi, std::size_t r) {
  if (r < 2) throw ArgumentError("bin count must be >= 2");
  if (!(std::isfinite(lo) && std::isfinite(hi))) throw ArgumentError("bin range must be finite");
  if (!(lo < hi)) throw DegenerateRangeError("yield range is degenerate (min == max)");
  BinScheme scheme;
  scheme.r = r;
  scheme.lo = lo;
  scheme.hi = hi;
  scheme.edges.resize(r + 1);
  const double width = (hi - lo) / static_cast<double>(r);
  for (std::size_t i = 0; i < r; ++i) scheme.edges[i] = lo + static_cast<double>(i) * width;
  scheme.edges[r] = hi;
  return scheme;
}

BinScheme fit_bins(std::span<const double> yields, std::size_t r) {
  if (yields.empty()) throw DegenerateRangeError("no yields to bin");
  const auto [lo, hi] = std::minmax_element(yields.begin(), yields.end());
  return make_bins(*lo, *hi, r);
}

std::size_t bin_of(const BinScheme& scheme, double yield) {
  const double pos = std::floor((yield - scheme.lo) / scheme.width());
  if (!(pos > 0.0)) return 0;
  if (pos >= static_cast<double>(scheme.r - 1)) return scheme.r - 1;
  return static_cast<std::size_t>(pos);
}

double expected_value(const YieldDistribution& d) {
  double e = 0.0;
  for (std::size_t b = 0; b < d.probs.size(); ++b) e += d.probs[b] * d.scheme.midpoint(b);
  return e;
}

double variance(const YieldDistribution& d) {
  const double e = expected_value(d);
  double v = 0.0;
  for (std::size_t b = 0; b < d.probs.size(); ++b) {
    const double dm = d.scheme.midpoint(b) - e;
    v += d.probs[b] * dm * dm;
  }
  return v;
}

int DecisionTree::predict(const FeatureRow& row) const {
  std::size_t at = 0;
  while (true) {
    const TreeNode& node = nodes[at];
    if (node.feature < 0) return node.label;
    const bool left = node.feature == kVarietyFeature
                          ? row.variety == node.category
                          : row.numeric[static_cast<std::size_t>(node.feature)] <= node.threshold;
    at = static_cast<std::size_t>(left ? node.left : node.right);
  }
}

int Forest::variety_index(const VarietyId& variety) const {
  const auto it = std::lower_bound(varieties.begin(), varieties.end(), variety);
  if (it == varieties.end() || *it != variety) {
    throw UnknownCategoryError("variety " + variety.code + " is unknown to the forest");
  }
  return static_cast<int>(it - varieties.begin());
}

std::vector<std::size_t> Forest::votes(const FeatureRow& row) const {
  std::vector<std::size_t> counts(scheme.r, 0);
  for (const auto& tree : trees) ++counts[static_cast<std::size_t>(tree.predict(row))];
  return counts;
}

FeatureRow make_row(const Forest& forest, const Conditions& conditions, const VarietyId& variety) {
  FeatureRow row;
  for (std::size_t i = 0; i < kWeatherCount; ++i) row.numeric[i] = conditions.weather[i];
  for (std::size_t i = 0; i < kSoilCount; ++i) row.numeric[kWeatherCount + i] = conditions.soil[i];
  row.variety = forest.variety_index(variety);
  return row;
}

Forest train_forest(std::span<const ExperimentRecord> records, const BinScheme& scheme,
                    const ForestConfig& config) {
  if (records.empty()) throw ArgumentError("forest training requires at least one record");
  if (config.n_trees < 1) throw ArgumentError("n_trees must be >= 1");
  if (config.min_leaf < 1) throw ArgumentError("min_leaf must be >= 1");

  Forest forest;
  forest.scheme = scheme;
  forest.seed = config.seed;
  for (const auto& r : records) forest.varieties.push_back(r.variety);
  std::sort(forest.varieties.begin(), forest.varieties.end());
  forest.varieties.erase(std::unique(forest.varieties.begin(), forest.varieties.end()),
                         forest.varieties.end());

  TrainingSet data;
  data.n_classes = scheme.r;
  data.n_categories = forest.varieties.size();
  data.rows.reserve(records.size());
  data.labels.reserve(records.size());
  for (const auto& r : records) {
    data.rows.push_back(make_row(forest, r.conditions, r.variety));
    data.labels.push_back(static_cast<int>(bin_of(scheme, r.yield)));
  }

  const std::size_t mtry =
      config.max_features > 0
          ? std::min(config.max_features, kFeatureCount)
          : std::max<std::size_t>(
                1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(kFeatureCount)))));

  const std::size_t n = records.size();
  forest.trees.resize(config.n_trees);
  std::vector<std::vector<bool>> in_bag(config.n_trees);
  parallel_for(config.n_trees, config.threads, [&](std::size_t t) {
    const std::uint64_t tree_seed = derive_seed(config.seed, t);
    Rng sampler(derive_seed(tree_seed, 0));
    std::vector<std::size_t> samples(n);
    std::vector<bool> bag(n, !config.bootstrap);
    if (config.bootstrap) {
      for (auto& s : samples) {
        s = static_cast<std::size_t>(sampler.below(n));
        bag[s] = true;
      }
    } else {
      std::iota(samples.begin(), samples.end(), std::size_t{0});
    }
    TreeBuilder builder(data, config, mtry, derive_seed(tree_seed, 1));
    forest.trees[t] = builder.build(std::move(samples));
    in_bag[t] = std::move(bag);
  });

  if (config.bootstrap) {
    std::size_t scored = 0;
    std::size_t correct = 0;
    std::vector<std::size_t> counts(scheme.r);
    for (std::size_t i = 0; i < n; ++i) {
      std::fill(counts.begin(), counts.end(), 0);
      bool any = false;
      for (std::size_t t = 0; t < config.n_trees; ++t) {
        if (in_bag[t][i]) continue;
        ++counts[static_cast<std::size_t>(forest.trees[t].predict(data.rows[i]))];
        any = true;
      }
      if (!any) continue;
      ++scored;
      const auto vote = std::max_element(counts.begin(), counts.end()) - counts.begin();
      if (vote == data.labels[i]) ++correct;
    }
    if (scored > 0) {
      forest.oob_accuracy = static_cast<double>(correct) / static_cast<double>(scored);
    }
  }
  return forest;
}

YieldDistribution predict_distribution(const Forest& forest, const WeatherValues& weather,
                                       const SoilValues& soil, const VarietyId& variety) {
  Conditions conditions{weather, soil};
  for (double v : weather) {
    if (!std::isfinite(v)) throw ArgumentError("weather features must be finite");
  }
  for (double v : soil) {
    if (!std::isfinite(v)) throw ArgumentError("soil features must be finite");
  }
  const FeatureRow row = make_row(forest, conditions, variety);
  const auto counts = forest.votes(row);
  YieldDistribution d;
  d.scheme = forest.scheme;
  d.probs.resize(counts.size());
  const auto total = static_cast<double>(forest.n_trees());
  for (std::size_t b = 0; b < counts.size(); ++b) {
    d.probs[b] = static_cast<double>(counts[b]) / total;
  }
  return d;
}

ClassifierReport evaluate_forest(const Forest& forest, std::span<const ExperimentRecord> records) {
  if (records.empty()) throw ArgumentError("evaluation requires at least one record");
  std::vector<double> actual, predicted;
  std::size_t correct = 0;
  for (const auto& r : records) {
    const auto truth = bin_of(forest.scheme, r.yield);
    const auto counts = forest.votes(make_row(forest, r.conditions, r.variety));
    const auto vote = static_cast<std::size_t>(
        std::max_element(counts.begin(), counts.end()) - counts.begin());
    if (vote == truth) ++correct;
    const auto d = predict_distribution(forest, r.conditions.weather, r.conditions.soil, r.variety);
    actual.push_back(forest.scheme.midpoint(truth));
    predicted.push_back(expected_value(d));
  }
  ClassifierReport report;
  report.accuracy = static_cast<double>(correct) / static_cast<double>(records.size());
  report.n_rmse = n_rmse(actual, predicted);
  return report;
}

nlohmann::json to_json(const Forest& forest) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : forest.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : tree.nodes) {
      nodes.push_back(nlohmann::json::array({n.feature, n.threshold, n.category, n.left, n.right, n.label}));
    }
    trees.push_back(std::move(nodes));
  }
  nlohmann::json varieties = nlohmann::json::array();
  for (const auto& v : forest.varieties) varieties.push_back(v.code);
  nlohmann::json doc{
      {"format", "seedmix.forest"},
      {"version", kForestVersion},
      {"scheme", {{"r", forest.scheme.r}, {"lo", forest.scheme.lo}, {"hi", forest.scheme.hi}}},
      {"varieties", varieties},
      {"seed", forest.seed},
      {"trees", trees},
  };
  doc["oob_accuracy"] = forest.oob_accuracy ? nlohmann::json(*forest.oob_accuracy) : nlohmann::json(nullptr);
  return doc;
}

Forest forest_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format").get<std::string>() != "seedmix.forest") {
      throw SchemaError("not a forest document");
    }
    if (doc.at("version").get<int>() != kForestVersion) throw SchemaError("unsupported forest version");
    Forest forest;
    const auto& s = doc.at("scheme");
    forest.scheme = make_bins(s.at("lo").get<double>(), s.at("hi").get<double>(),
                              s.at("r").get<std::size_t>());
    for (const auto& v : doc.at("varieties")) forest.varieties.push_back(VarietyId{v.get<std::string>()});
    if (!std::is_sorted(forest.varieties.begin(), forest.varieties.end())) {
      throw SchemaError("forest varieties must be sorted");
    }
    forest.seed = doc.at("seed").get<std::uint64_t>();
    if (const auto& oob = doc.at("oob_accuracy"); !oob.is_null()) forest.oob_accuracy = oob.get<double>();
    const auto r = static_cast<int>(forest.scheme.r);
    const auto categories = static_cast<int>(forest.varieties.size());
    for (const auto& tree_doc : doc.at("trees")) {
      DecisionTree tree;
      for (const auto& n : tree_doc) {
        TreeNode node{n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(),
                      n.at(3).get<int>(),  n.at(4).get<int>(),    n.at(5).get<int>()};
        tree.nodes.push_back(node);
      }
      const auto size = static_cast<int>(tree.nodes.size());
      if (size == 0) throw SchemaError("forest contains an empty tree");
      for (int i = 0; i < size; ++i) {
        const TreeNode& node = tree.nodes[static_cast<std::size_t>(i)];
        if (node.label < 0 || node.label >= r) throw ValidationError("leaf label out of range");
        if (node.feature < 0) continue;
        if (node.feature > kVarietyFeature || node.left <= i || node.right <= i ||
            node.left >= size || node.right >= size) {
          throw ValidationError("malformed tree node");
        }
        if (node.feature == kVarietyFeature && (node.category < 0 || node.category >= categories)) {
          throw ValidationError("categorical split on unknown category");
        }
      }
      forest.trees.push_back(std::move(tree));
    }
    if (forest.trees.empty()) throw ValidationError("forest has no trees");
    return forest;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed forest document: ") + e.what());
  }
}

}  // namespace seedmix
