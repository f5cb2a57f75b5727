#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "seedmix/domain.hpp"
#include "seedmix/optimizer.hpp"

namespace seedmix {

inline constexpr double kEarthRadiusMiles = 3958.8;

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
};

double haversine_miles(GeoPoint a, GeoPoint b);

struct Neighborhood {
  std::string center;
  double radius_miles = 0.0;
  std::vector<std::string> neighbors;  // sorted by key, center excluded
};

// Every other sub-region whose centroid lies within `radius_miles` (inclusive)
// of the center's centroid. Throws KeyError for an unknown center.
Neighborhood near(const RegionMap& regions, const std::string& center, double radius_miles);

// Neighborhoods of all sub-regions in key order; one pass over all pairs.
std::vector<Neighborhood> all_neighborhoods(const RegionMap& regions, double radius_miles);

// Returns the solution a sub-region holds in the current mode, or nullptr.
using SolutionLookup = std::function<const PortfolioSolution*(std::string_view)>;

// Mean weight of `variety` across the neighborhood; neighbors without a
// solution or without the variety contribute 0. Throws UndefinedScoreError on
// an empty neighborhood.
double variety_score(const VarietyId& variety, const Neighborhood& neighborhood,
                     const SolutionLookup& solutions);

// Sum of variety scores of the solution's varieties divided by the divisor.
double sc_score(const PortfolioSolution& solution, const Neighborhood& neighborhood,
                const SolutionLookup& solutions, AverageDivisor divisor = AverageDivisor::five);

}  // namespace seedmix
