#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "seedmix/domain.hpp"
#include "seedmix/optimizer.hpp"
#include "seedmix/yield_model.hpp"

namespace seedmix {

inline constexpr int kAtlasVersion = 1;

struct TopKEntry {
  VarietyStats stats;
  double score = 0.0;
  std::vector<double> distribution;  // bin probabilities; may be empty
};

// Everything computed for one sub-region.
struct SubRegionResult {
  std::string id;
  double lat = 0.0;
  double lon = 0.0;
  std::array<YearSeries, kWeatherCount> weather_history;
  SoilValues soil{};
  WeatherValues forecast{};           // predicted conditions for the target year
  std::vector<VarietyStats> stats;    // every variety, in code order
  std::vector<TopKEntry> topk;        // best score first
  TauSweep sweep;                     // one entry per tau grid point
  std::optional<PortfolioSolution> default_solution;
  std::vector<std::optional<double>> sc;  // spatial cohesion per tau grid point
  std::optional<double> sc_default;       // default solution vs neighbors' defaults
  std::size_t neighbor_count = 0;

  const PortfolioSolution* solution_at(std::size_t tau_idx) const;
  const VarietyStats* stats_for(const VarietyId& variety) const;
};

// Means over the sub-regions that have a default solution.
struct RegionSummary {
  std::size_t subregions = 0;
  std::size_t solved = 0;
  double average_yield = 0.0;
  double average_sd = 0.0;
  double average_offset_pct = 0.0;
};

RegionSummary summarize(const std::vector<const PortfolioSolution*>& solutions,
                        std::size_t subregions);

struct SolutionAtlas {
  nlohmann::json config;  // snapshot of the settings that produced it
  int target_year = 0;
  BinScheme scheme;
  std::vector<VarietyId> varieties;        // sorted
  std::vector<SubRegionResult> subregions; // sorted by id
  RegionSummary summary;

  const SubRegionResult* find(std::string_view id) const;
  RegionSummary summary_at(std::size_t tau_idx) const;
};

nlohmann::json to_json(const PortfolioSolution& solution, std::string_view sub_region_id);
nlohmann::json to_json(const RegionSummary& summary);
nlohmann::json to_json(const SolutionAtlas& atlas);
SolutionAtlas atlas_from_json(const nlohmann::json& doc);

// Canonical text form: byte-identical for identical atlases.
std::string serialize_atlas(const SolutionAtlas& atlas);
SolutionAtlas parse_atlas(std::string_view text);

// Optimizer and summary invariant audit over every stored solution.
std::vector<std::string> audit_atlas(const SolutionAtlas& atlas);

}  // namespace seedmix
