#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "seedmix/forecast.hpp"
#include "seedmix/optimizer.hpp"
#include "seedmix/yield_model.hpp"

namespace seedmix {

struct PipelineConfig {
  std::size_t k = 10;                 // top-k candidates per sub-region
  std::size_t bins = 20;              // yield bins r
  double radius_miles = 50.0;         // neighborhood radius m
  std::size_t histogram_bins = 10;    // prevalence histogram bins over (0, 1]
  AverageDivisor divisor = AverageDivisor::five;
  std::uint64_t split_seed = 1;
  TrainConfig forecast;
  ForestConfig forest;
  std::optional<int> target_year;     // defaults to the last observed year + 1
  std::size_t threads = 1;            // never part of the snapshot
};

void validate(const PipelineConfig& config);

// Settings consumed by the CLI: the pipeline knobs plus input/output paths.
struct RunConfig {
  PipelineConfig pipeline;
  std::filesystem::path region_csv;
  std::filesystem::path experiments_csv;
  std::filesystem::path forecast_model;
  std::filesystem::path yield_model;
};

// Parses `key = value` lines; '#' starts a comment. Throws ParseError.
std::map<std::string, std::string> parse_key_values(std::string_view text);

// Applies one setting; throws ArgumentError for unknown keys or bad values.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

// Reads a config file. Relative paths inside it resolve against its directory.
RunConfig load_run_config(const std::filesystem::path& path);

// Every setting with its current value, in a form load_run_config accepts.
std::string render_run_config(const RunConfig& config);

// Deterministic description of the knobs that shape an atlas.
nlohmann::json snapshot(const PipelineConfig& config);

std::string_view to_string(AverageDivisor divisor);
AverageDivisor parse_divisor(std::string_view text);

}  // namespace seedmix
