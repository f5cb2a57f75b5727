#pragma once

#include <filesystem>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "seedmix/domain.hpp"

namespace seedmix {

inline constexpr std::string_view kRegionHeader =
    "sub_region_id,lat,lon,year,temperature,precipitation,solar_radiation,"
    "soil_ph,soil_organic_matter,soil_cec";
inline constexpr std::string_view kExperimentHeader =
    "sub_region_id,year,variety_id,temperature,precipitation,solar_radiation,"
    "soil_ph,soil_organic_matter,soil_cec,yield";

// Region dataset: one row per (sub-region, year). Rows of the same id are
// merged into its year-indexed series; lat/lon and soil must agree across them.
RegionMap load_region_dataset(const std::filesystem::path& path);
RegionMap read_region_csv(std::istream& in);

// Experiment dataset in file order, with referential integrity against
// `regions` checked.
std::vector<ExperimentRecord> load_experiment_dataset(const std::filesystem::path& path,
                                                      const RegionMap& regions);
std::vector<ExperimentRecord> read_experiment_csv(std::istream& in, const RegionMap& regions);

void write_region_csv(std::ostream& out, const RegionMap& regions);
void write_experiment_csv(std::ostream& out, const std::vector<ExperimentRecord>& records);

// Loads both files and assembles a validated Catalog.
Catalog load_catalog(const std::filesystem::path& region_csv,
                     const std::filesystem::path& experiment_csv);
// Writes region.csv and experiments.csv into `dir` (created if needed).
void write_catalog(const Catalog& catalog, const std::filesystem::path& dir);

// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

}  // namespace seedmix
