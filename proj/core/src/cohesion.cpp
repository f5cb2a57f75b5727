#include "seedmix/cohesion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "seedmix/errors.hpp"

namespace seedmix {

double haversine_miles(GeoPoint a, GeoPoint b) {
  constexpr double kRad = std::numbers::pi / 180.0;
  const double dlat = (b.lat - a.lat) * kRad;
  const double dlon = (b.lon - a.lon) * kRad;
  const double s1 = std::sin(dlat / 2.0);
  const double s2 = std::sin(dlon / 2.0);
  double h = s1 * s1 + std::cos(a.lat * kRad) * std::cos(b.lat * kRad) * s2 * s2;
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * kEarthRadiusMiles * std::asin(std::sqrt(h));
}

namespace {
GeoPoint centroid(const SubRegion& r) { return GeoPoint{r.centroid_lat, r.centroid_lon}; }
}  // namespace

Neighborhood near(const RegionMap& regions, const std::string& center, double radius_miles) {
  const auto it = regions.find(center);
  if (it == regions.end()) throw KeyError("unknown sub-region " + center);
  Neighborhood hood{center, radius_miles, {}};
  const GeoPoint c = centroid(it->second);
  for (const auto& [id, region] : regions) {
    if (id == center) continue;
    if (haversine_miles(c, centroid(region)) <= radius_miles) hood.neighbors.push_back(id);
  }
  return hood;
}

std::vector<Neighborhood> all_neighborhoods(const RegionMap& regions, double radius_miles) {
  std::vector<const SubRegion*> ordered;
  ordered.reserve(regions.size());
  for (const auto& [id, region] : regions) ordered.push_back(&region);
  std::vector<Neighborhood> hoods;
  hoods.reserve(ordered.size());
  for (const auto* r : ordered) hoods.push_back(Neighborhood{r->id, radius_miles, {}});
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    for (std::size_t j = i + 1; j < ordered.size(); ++j) {
      if (haversine_miles(centroid(*ordered[i]), centroid(*ordered[j])) <= radius_miles) {
        hoods[i].neighbors.push_back(ordered[j]->id);
        hoods[j].neighbors.push_back(ordered[i]->id);
      }
    }
  }
  // Pairs are visited in key order, so each neighbor list is already sorted.
  return hoods;
}

double variety_score(const VarietyId& variety, const Neighborhood& neighborhood,
                     const SolutionLookup& solutions) {
  if (neighborhood.neighbors.empty()) {
    throw UndefinedScoreError("sub-region " + neighborhood.center + " has no neighbors within " +
                              std::to_string(neighborhood.radius_miles) + " miles");
  }
  double total = 0.0;
  for (const auto& id : neighborhood.neighbors) {
    if (const PortfolioSolution* s = solutions(id)) total += s->weight_of(variety).value_or(0.0);
  }
  return total / static_cast<double>(neighborhood.neighbors.size());
}

double sc_score(const PortfolioSolution& solution, const Neighborhood& neighborhood,
                const SolutionLookup& solutions, AverageDivisor divisor) {
  if (solution.entries.empty()) throw ArgumentError("sc_score requires a non-empty solution");
  double total = 0.0;
  for (const auto& entry : solution.entries) {
    total += variety_score(entry.variety, neighborhood, solutions);
  }
  const double d = divisor == AverageDivisor::five ? static_cast<double>(kMaxMix)
                                                   : static_cast<double>(solution.entries.size());
  return total / d;
}

}  // namespace seedmix
