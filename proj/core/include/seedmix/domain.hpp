#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace seedmix {

inline constexpr std::size_t kWeatherCount = 3;
inline constexpr std::size_t kSoilCount = 3;

// Column names used by the CSV schemas; the order is the feature order.
inline constexpr std::array<std::string_view, kWeatherCount> kWeatherAttributes{
    "temperature", "precipitation", "solar_radiation"};
inline constexpr std::array<std::string_view, kSoilCount> kSoilAttributes{
    "soil_ph", "soil_organic_matter", "soil_cec"};

// Index of a weather attribute by name, or nullopt.
std::optional<std::size_t> weather_index(std::string_view name);
std::optional<std::size_t> soil_index(std::string_view name);

struct VarietyId {
  std::string code;

  friend auto operator<=>(const VarietyId&, const VarietyId&) = default;
};

using YearSeries = std::map<int, double>;
using WeatherValues = std::array<double, kWeatherCount>;
using SoilValues = std::array<double, kSoilCount>;

// Growing-condition feature vector of one (sub-region, year).
struct Conditions {
  WeatherValues weather{};
  SoilValues soil{};

  friend bool operator==(const Conditions&, const Conditions&) = default;
};

struct SubRegion {
  std::string id;
  double centroid_lat = 0.0;
  double centroid_lon = 0.0;
  std::array<YearSeries, kWeatherCount> weather;
  SoilValues soil{};

  int first_year() const;
  int last_year() const;
  // Conditions observed in `year`; throws DataGapError when absent.
  Conditions conditions_in(int year) const;

  friend bool operator==(const SubRegion&, const SubRegion&) = default;
};

struct ExperimentRecord {
  std::string sub_region;
  int year = 0;
  VarietyId variety;
  Conditions conditions;
  double yield = 0.0;  // bushels/acre

  friend bool operator==(const ExperimentRecord&, const ExperimentRecord&) = default;
};

using RegionMap = std::map<std::string, SubRegion>;

struct Catalog {
  RegionMap sub_regions;
  std::vector<ExperimentRecord> experiments;
  std::set<VarietyId> varieties;
  std::vector<std::string> weather_attribute_names{kWeatherAttributes.begin(),
                                                   kWeatherAttributes.end()};
  std::vector<std::string> soil_attribute_names{kSoilAttributes.begin(),
                                                kSoilAttributes.end()};

  friend bool operator==(const Catalog&, const Catalog&) = default;
};

// Invariant checks; each throws ValidationError / IntegrityError.
void validate(const SubRegion& region);
void validate(const ExperimentRecord& record, const RegionMap& regions);
void validate(const Catalog& catalog);

}  // namespace seedmix
