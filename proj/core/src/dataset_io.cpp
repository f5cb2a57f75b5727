#include "seedmix/dataset_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "seedmix/errors.hpp"
#include "seedmix/file_util.hpp"

namespace seedmix {
namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

// Maps header names to positions and reports the first missing column.
class ColumnIndex {
 public:
  ColumnIndex(std::string_view header, std::string_view expected_header) {
    const auto names = split_fields(header);
    for (std::size_t i = 0; i < names.size(); ++i) {
      const auto name = std::string(trim(names[i]));
      if (!positions_.emplace(name, i).second) {
        throw SchemaError("duplicate column '" + name + "'");
      }
    }
    for (const auto expected : split_fields(expected_header)) {
      const auto it = positions_.find(std::string(expected));
      if (it == positions_.end()) {
        throw SchemaError("missing column '" + std::string(expected) + "'");
      }
      ordered_.push_back(it->second);
    }
    width_ = names.size();
  }

  // Position of the i-th column of the canonical header.
  std::size_t operator[](std::size_t i) const { return ordered_[i]; }
  std::size_t width() const { return width_; }

 private:
  std::unordered_map<std::string, std::size_t> positions_;
  std::vector<std::size_t> ordered_;
  std::size_t width_ = 0;
};

double parse_double(std::string_view text, std::size_t row, std::string_view column) {
  text = trim(text);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) {
    throw ParseError("row " + std::to_string(row) + ": column '" + std::string(column) +
                     "' is not a finite number: '" + std::string(text) + "'");
  }
  return value;
}

int parse_int(std::string_view text, std::size_t row, std::string_view column) {
  text = trim(text);
  int value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ParseError("row " + std::to_string(row) + ": column '" + std::string(column) +
                     "' is not an integer: '" + std::string(text) + "'");
  }
  return value;
}

std::string parse_key(std::string_view text, std::size_t row, std::string_view column) {
  text = trim(text);
  if (text.empty()) {
    throw ParseError("row " + std::to_string(row) + ": column '" + std::string(column) +
                     "' is empty");
  }
  return std::string(text);
}

// Reads the header line; returns false on a completely empty stream.
bool read_header(std::istream& in, std::string& header) {
  if (!std::getline(in, header)) return false;
  // Tolerate a UTF-8 byte-order mark.
  if (header.size() >= 3 && header.compare(0, 3, "\xEF\xBB\xBF") == 0) header.erase(0, 3);
  return true;
}

template <typename RowFn>
void for_each_row(std::istream& in, std::string_view expected_header, RowFn&& fn) {
  std::string header;
  if (!read_header(in, header)) throw SchemaError("missing header row");
  const ColumnIndex columns(header, expected_header);
  const auto names = split_fields(expected_header);
  std::string line;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != columns.width()) {
      throw ParseError("row " + std::to_string(row) + ": expected " +
                       std::to_string(columns.width()) + " fields, found " +
                       std::to_string(fields.size()));
    }
    fn(row, [&](std::size_t canonical) { return fields[columns[canonical]]; }, names);
  }
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) throw IoError("cannot format number");
  return std::string(buf, ptr);
}

RegionMap read_region_csv(std::istream& in) {
  RegionMap regions;
  for_each_row(in, kRegionHeader, [&](std::size_t row, auto field, const auto& names) {
    const std::string id = parse_key(field(0), row, names[0]);
    const double lat = parse_double(field(1), row, names[1]);
    const double lon = parse_double(field(2), row, names[2]);
    const int year = parse_int(field(3), row, names[3]);
    if (!(lat >= -90.0 && lat <= 90.0)) {
      throw ValidationError("row " + std::to_string(row) + ": lat out of range");
    }
    if (!(lon >= -180.0 && lon <= 180.0)) {
      throw ValidationError("row " + std::to_string(row) + ": lon out of range");
    }
    WeatherValues weather{};
    for (std::size_t a = 0; a < kWeatherCount; ++a) {
      weather[a] = parse_double(field(4 + a), row, names[4 + a]);
    }
    SoilValues soil{};
    for (std::size_t s = 0; s < kSoilCount; ++s) {
      soil[s] = parse_double(field(7 + s), row, names[7 + s]);
    }

    auto [it, inserted] = regions.try_emplace(id);
    SubRegion& region = it->second;
    if (inserted) {
      region.id = id;
      region.centroid_lat = lat;
      region.centroid_lon = lon;
      region.soil = soil;
    } else {
      if (region.centroid_lat != lat || region.centroid_lon != lon) {
        throw ConflictError("row " + std::to_string(row) + ": centroid of " + id +
                            " differs from an earlier row");
      }
      if (region.soil != soil) {
        throw ConflictError("row " + std::to_string(row) + ": soil attributes of " + id +
                            " differ from an earlier row");
      }
    }
    for (std::size_t a = 0; a < kWeatherCount; ++a) {
      if (!region.weather[a].emplace(year, weather[a]).second) {
        throw ConflictError("row " + std::to_string(row) + ": duplicate (" + id + ", " +
                            std::to_string(year) + ", " + std::string(kWeatherAttributes[a]) +
                            ")");
      }
    }
  });
  for (const auto& [id, region] : regions) validate(region);
  return regions;
}

RegionMap load_region_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_region_csv(in);
}

std::vector<ExperimentRecord> read_experiment_csv(std::istream& in, const RegionMap& regions) {
  std::vector<ExperimentRecord> records;
  for_each_row(in, kExperimentHeader, [&](std::size_t row, auto field, const auto& names) {
    ExperimentRecord record;
    record.sub_region = parse_key(field(0), row, names[0]);
    record.year = parse_int(field(1), row, names[1]);
    record.variety = VarietyId{parse_key(field(2), row, names[2])};
    for (std::size_t a = 0; a < kWeatherCount; ++a) {
      record.conditions.weather[a] = parse_double(field(3 + a), row, names[3 + a]);
    }
    for (std::size_t s = 0; s < kSoilCount; ++s) {
      record.conditions.soil[s] = parse_double(field(6 + s), row, names[6 + s]);
    }
    record.yield = parse_double(field(9), row, names[9]);
    if (!regions.contains(record.sub_region)) {
      throw IntegrityError("row " + std::to_string(row) + ": unknown sub-region " +
                           record.sub_region);
    }
    if (record.yield < 0.0) {
      throw ValidationError("row " + std::to_string(row) + ": negative yield");
    }
    records.push_back(std::move(record));
  });
  return records;
}

std::vector<ExperimentRecord> load_experiment_dataset(const std::filesystem::path& path,
                                                      const RegionMap& regions) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_experiment_csv(in, regions);
}

void write_region_csv(std::ostream& out, const RegionMap& regions) {
  out << kRegionHeader << '\n';
  for (const auto& [id, region] : regions) {
    for (const auto& [year, temperature] : region.weather[0]) {
      out << id << ',' << format_double(region.centroid_lat) << ','
          << format_double(region.centroid_lon) << ',' << year;
      for (std::size_t a = 0; a < kWeatherCount; ++a) {
        out << ',' << format_double(region.weather[a].at(year));
      }
      for (double s : region.soil) out << ',' << format_double(s);
      out << '\n';
    }
  }
}

void write_experiment_csv(std::ostream& out, const std::vector<ExperimentRecord>& records) {
  out << kExperimentHeader << '\n';
  for (const auto& r : records) {
    out << r.sub_region << ',' << r.year << ',' << r.variety.code;
    for (double w : r.conditions.weather) out << ',' << format_double(w);
    for (double s : r.conditions.soil) out << ',' << format_double(s);
    out << ',' << format_double(r.yield) << '\n';
  }
}

Catalog load_catalog(const std::filesystem::path& region_csv,
                     const std::filesystem::path& experiment_csv) {
  Catalog catalog;
  catalog.sub_regions = load_region_dataset(region_csv);
  catalog.experiments = load_experiment_dataset(experiment_csv, catalog.sub_regions);
  for (const auto& r : catalog.experiments) catalog.varieties.insert(r.variety);
  validate(catalog);
  return catalog;
}

void write_catalog(const Catalog& catalog, const std::filesystem::path& dir) {
  std::ostringstream regions;
  write_region_csv(regions, catalog.sub_regions);
  std::ostringstream experiments;
  write_experiment_csv(experiments, catalog.experiments);
  write_file_atomic(dir / "region.csv", regions.str());
  write_file_atomic(dir / "experiments.csv", experiments.str());
}

}  // namespace seedmix
