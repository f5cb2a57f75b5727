#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "seedmix/domain.hpp"

namespace seedmix {

struct GenConfig {
  std::size_t n_subregions = 50;
  std::size_t n_varieties = 20;
  int first_year = 2000;
  int last_year = 2015;
  std::uint64_t seed = 7;
  double noise_scale = 0.05;        // fraction of each signal's magnitude
  std::size_t experiments_per_pair = 2;
};

void validate(const GenConfig& config);

inline constexpr std::size_t kConditionCount = kWeatherCount + kSoilCount;

// Fixed physical ranges used to map raw conditions into [0, 1] for the latent
// response; values outside the range are allowed and simply extrapolate.
struct ConditionRanges {
  std::array<double, kConditionCount> lo{8.0, 450.0, 11.0, 5.5, 1.0, 5.0};
  std::array<double, kConditionCount> hi{26.0, 1250.0, 21.0, 7.5, 5.0, 30.0};
};

// Quadratic yield surface of one variety over normalized conditions:
// peak - sum_d curvature[d] * (z_d - optimum[d])^2, clamped at zero.
struct VarietyResponse {
  VarietyId variety;
  double peak = 0.0;
  std::array<double, kConditionCount> optimum{};
  std::array<double, kConditionCount> curvature{};
};

// Per-sub-region weather process: base + trend * (year - first_year) + noise.
struct WeatherProcess {
  std::array<double, kWeatherCount> base{};
  std::array<double, kWeatherCount> trend{};
};

struct LatentTruth {
  ConditionRanges ranges;
  std::vector<VarietyResponse> responses;   // ordered by variety code
  std::map<std::string, WeatherProcess> weather;  // by sub-region id

  const VarietyResponse& response(const VarietyId& variety) const;
  // Noise-free yield of `variety` under `conditions`.
  double latent_yield(const VarietyId& variety, const Conditions& conditions) const;
};

struct GeneratedData {
  Catalog catalog;
  LatentTruth truth;
};

// Deterministic in `config`; throws ArgumentError on an invalid config.
GeneratedData generate(const GenConfig& config);

}  // namespace seedmix
