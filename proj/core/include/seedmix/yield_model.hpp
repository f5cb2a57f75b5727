#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "seedmix/domain.hpp"

namespace seedmix {

// r equal-width yield bins over [lo, hi], left-closed with the top bin closed.
struct BinScheme {
  std::size_t r = 0;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> edges;  // r + 1 ascending boundaries

  double width() const { return (hi - lo) / static_cast<double>(r); }
  double midpoint(std::size_t bin) const;

  friend bool operator==(const BinScheme&, const BinScheme&) = default;
};

// Throws DegenerateRangeError when all yields are equal, ArgumentError if r < 2.
BinScheme fit_bins(std::span<const double> yields, std::size_t r);
BinScheme make_bins(double lo, double hi, std::size_t r);
std::size_t bin_of(const BinScheme& scheme, double yield);

struct YieldDistribution {
  BinScheme scheme;
  std::vector<double> probs;
};

double expected_value(const YieldDistribution& d);
double variance(const YieldDistribution& d);

inline constexpr std::size_t kNumericFeatures = kWeatherCount + kSoilCount;
// Six numeric conditions plus the categorical variety feature.
inline constexpr std::size_t kFeatureCount = kNumericFeatures + 1;
inline constexpr int kVarietyFeature = static_cast<int>(kNumericFeatures);

struct FeatureRow {
  std::array<double, kNumericFeatures> numeric{};
  int variety = 0;  // index into the forest's variety list
};

struct TreeNode {
  int feature = -1;        // -1 marks a leaf
  double threshold = 0.0;  // numeric split: left when value <= threshold
  int category = -1;       // categorical split: left when variety == category
  int left = -1;
  int right = -1;
  int label = 0;           // majority class; meaningful at leaves

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  int predict(const FeatureRow& row) const;
  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

struct ForestConfig {
  std::size_t n_trees = 100;
  std::size_t min_leaf = 2;
  bool bootstrap = true;
  std::size_t max_features = 0;  // 0 selects floor(sqrt(feature count))
  std::uint64_t seed = 1;
  std::size_t threads = 1;
};

struct Forest {
  BinScheme scheme;
  std::vector<VarietyId> varieties;  // sorted; categorical feature codes
  std::vector<DecisionTree> trees;
  std::uint64_t seed = 0;
  std::optional<double> oob_accuracy;  // absent when bootstrap is disabled

  std::size_t n_trees() const { return trees.size(); }
  // Index of `variety` in the feature schema; throws UnknownCategoryError.
  int variety_index(const VarietyId& variety) const;
  // Per-bin vote counts.
  std::vector<std::size_t> votes(const FeatureRow& row) const;

  friend bool operator==(const Forest&, const Forest&) = default;
};

FeatureRow make_row(const Forest& forest, const Conditions& conditions, const VarietyId& variety);

// Bootstrap-aggregated CART classifier over bin_of(yield) targets. Each split
// considers max_features random candidate features and uses Gini impurity.
// Trees are seeded independently from the master seed, so the result does not
// depend on `threads`.
Forest train_forest(std::span<const ExperimentRecord> records, const BinScheme& scheme,
                    const ForestConfig& config);

YieldDistribution predict_distribution(const Forest& forest, const WeatherValues& weather,
                                       const SoilValues& soil, const VarietyId& variety);

struct ClassifierReport {
  double accuracy = 0.0;  // majority vote == true bin
  double n_rmse = 0.0;    // expected value vs true-bin midpoint, percent
};
ClassifierReport evaluate_forest(const Forest& forest, std::span<const ExperimentRecord> records);

nlohmann::json to_json(const Forest& forest);
Forest forest_from_json(const nlohmann::json& doc);

}  // namespace seedmix
