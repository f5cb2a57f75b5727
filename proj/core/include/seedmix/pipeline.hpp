#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "seedmix/atlas.hpp"
#include "seedmix/config.hpp"
#include "seedmix/domain.hpp"
#include "seedmix/forecast.hpp"
#include "seedmix/yield_model.hpp"

namespace seedmix {

struct ForecastReport {
  std::string attribute;
  std::size_t train_size = 0;
  std::size_t valid_size = 0;
  std::size_t test_size = 0;
  double train_n_rmse = 0.0;
  std::optional<double> valid_n_rmse;
  std::optional<double> test_n_rmse;
};

// One model per weather attribute. Sub-regions are split 70:15:15; each model
// learns to predict the last observed year from all earlier years.
ForecastModels train_forecast_models(const RegionMap& regions, const PipelineConfig& config,
                                     std::vector<ForecastReport>* reports = nullptr);

struct YieldReport {
  std::size_t train_size = 0;
  std::size_t valid_size = 0;
  std::size_t test_size = 0;
  std::optional<double> oob_accuracy;
  std::optional<ClassifierReport> valid;
  std::optional<ClassifierReport> test;
};

// Bins from the full historical yield range, forest on the 70% training split.
Forest train_yield_model(const Catalog& catalog, const PipelineConfig& config,
                         YieldReport* report = nullptr);

// Forecast conditions and per-variety yield statistics for one sub-region,
// before any optimization.
struct SubRegionPrediction {
  SubRegionResult result;                       // id, location, history, forecast, stats
  std::vector<std::vector<double>> distributions;  // aligned with result.stats; may be empty
};

std::vector<SubRegionPrediction> predict_subregions(const Catalog& catalog,
                                                    const ForecastModels& models,
                                                    const Forest& forest,
                                                    const PipelineConfig& config,
                                                    int target_year);

// Top-k, tau sweep, default solution, spatial cohesion and the region summary.
SolutionAtlas solve_atlas(std::vector<SubRegionPrediction> predictions, const PipelineConfig& config,
                          int target_year, const BinScheme& scheme);

SolutionAtlas build_atlas(const Catalog& catalog, const ForecastModels& models, const Forest& forest,
                          const PipelineConfig& config);

struct VarietyPrevalence {
  VarietyId variety;
  std::vector<double> weights;          // per sub-region, atlas order, 0 when absent
  double expected_weight = 0.0;         // mean including zeros
  std::vector<std::size_t> histogram;   // equal bins over (0, 1]; zeros excluded
  std::size_t present = 0;              // sub-regions with weight > 0
};

// Descending expected weight, ties by code. Uses default solutions, or the
// solutions at tau grid index `tau_idx` when given.
std::vector<VarietyPrevalence> prevalence_ranking(const SolutionAtlas& atlas,
                                                  std::optional<std::size_t> tau_idx = std::nullopt,
                                                  std::size_t histogram_bins = 10);

// Region-level stats: per-variety mean E and Var over sub-regions, normalized
// across all varieties.
std::vector<VarietyStats> region_stats(const SolutionAtlas& atlas);

struct CommonSolution {
  PortfolioSolution solution;
  double region_yield = 0.0;         // sum w * region-mean E
  double mean_subregion_sd = 0.0;    // common weights evaluated per sub-region
};

// Weights for exactly `chosen` (1..5 distinct known varieties) over region
// stats; at `tau` when given, else the default rule over the tau sweep.
// Throws ArgumentError / KeyError on bad input; nullopt when infeasible.
std::optional<CommonSolution> common_solution(const SolutionAtlas& atlas,
                                              std::span<const VarietyId> chosen,
                                              std::optional<double> tau = std::nullopt,
                                              AverageDivisor divisor = AverageDivisor::five);

// Sub-regions whose default (or tau-indexed) solution contains any of the
// varieties, optionally with weight in [range.first, range.second]. Sorted ids.
std::vector<std::string> highlight_subregions(
    const SolutionAtlas& atlas, const std::set<VarietyId>& varieties,
    std::optional<std::pair<double, double>> range = std::nullopt,
    std::optional<std::size_t> tau_idx = std::nullopt);

// Number of sub-regions whose top-k list contains each variety.
std::map<VarietyId, std::size_t> topk_counts(const SolutionAtlas& atlas);
std::vector<std::string> topk_members(const SolutionAtlas& atlas, const VarietyId& variety);

struct MixPerformance {
  std::size_t subregions = 0;
  double mean_yield = 0.0;
  double yield_variance = 0.0;  // population variance of per-sub-region yields
  double mean_sd = 0.0;
};

struct SolutionComparison {
  MixPerformance differentiated;
  MixPerformance common;
};

// Evaluates default solutions and the common mix on the solved sub-regions.
SolutionComparison compare_solutions(const SolutionAtlas& atlas, const PortfolioSolution& common,
                                     AverageDivisor divisor = AverageDivisor::five);

}  // namespace seedmix
