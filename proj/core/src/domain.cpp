#include "seedmix/domain.hpp"

#include <cmath>

#include "seedmix/errors.hpp"

namespace seedmix {

std::optional<std::size_t> weather_index(std::string_view name) {
  for (std::size_t i = 0; i < kWeatherAttributes.size(); ++i) {
    if (kWeatherAttributes[i] == name) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> soil_index(std::string_view name) {
  for (std::size_t i = 0; i < kSoilAttributes.size(); ++i) {
    if (kSoilAttributes[i] == name) return i;
  }
  return std::nullopt;
}

int SubRegion::first_year() const {
  if (weather[0].empty()) throw DataGapError("sub-region " + id + " has no weather data");
  return weather[0].begin()->first;
}

int SubRegion::last_year() const {
  if (weather[0].empty()) throw DataGapError("sub-region " + id + " has no weather data");
  return weather[0].rbegin()->first;
}

Conditions SubRegion::conditions_in(int year) const {
  Conditions c;
  for (std::size_t a = 0; a < kWeatherCount; ++a) {
    const auto it = weather[a].find(year);
    if (it == weather[a].end()) {
      throw DataGapError("sub-region " + id + " has no " +
                         std::string(kWeatherAttributes[a]) + " value for year " +
                         std::to_string(year));
    }
    c.weather[a] = it->second;
  }
  c.soil = soil;
  return c;
}

void validate(const SubRegion& region) {
  if (region.id.empty()) throw ValidationError("sub-region id is empty");
  if (!(region.centroid_lat >= -90.0 && region.centroid_lat <= 90.0)) {
    throw ValidationError("lat out of range for sub-region " + region.id);
  }
  if (!(region.centroid_lon >= -180.0 && region.centroid_lon <= 180.0)) {
    throw ValidationError("lon out of range for sub-region " + region.id);
  }
  for (double s : region.soil) {
    if (!std::isfinite(s)) throw ValidationError("non-finite soil value in " + region.id);
  }
  for (std::size_t a = 0; a < kWeatherCount; ++a) {
    const YearSeries& series = region.weather[a];
    if (series.empty()) continue;
    int expected = series.begin()->first;
    for (const auto& [year, value] : series) {
      if (year != expected) {
        throw ValidationError("sub-region " + region.id + " " +
                              std::string(kWeatherAttributes[a]) +
                              " series is not contiguous: missing year " +
                              std::to_string(expected));
      }
      if (!std::isfinite(value)) {
        throw ValidationError("non-finite weather value in " + region.id);
      }
      ++expected;
    }
    if (a > 0 && series.size() != region.weather[0].size()) {
      throw ValidationError("sub-region " + region.id +
                            " weather attributes cover different years");
    }
  }
}

void validate(const ExperimentRecord& record, const RegionMap& regions) {
  if (!regions.contains(record.sub_region)) {
    throw IntegrityError("experiment references unknown sub-region " + record.sub_region);
  }
  if (record.variety.code.empty()) throw ValidationError("experiment variety id is empty");
  if (!std::isfinite(record.yield) || record.yield < 0.0) {
    throw ValidationError("experiment yield must be finite and non-negative");
  }
}

void validate(const Catalog& catalog) {
  for (const auto& [key, region] : catalog.sub_regions) {
    if (key != region.id) throw IntegrityError("sub-region key mismatch: " + key);
    validate(region);
  }
  for (const auto& record : catalog.experiments) {
    validate(record, catalog.sub_regions);
    if (!catalog.varieties.contains(record.variety)) {
      throw IntegrityError("experiment variety " + record.variety.code + " not in catalog");
    }
  }
  if (catalog.weather_attribute_names.size() != kWeatherCount ||
      catalog.soil_attribute_names.size() != kSoilCount) {
    throw ValidationError("catalog must name exactly 3 weather and 3 soil attributes");
  }
}

}  // namespace seedmix
