#include "seedmix/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "seedmix/errors.hpp"
#include "seedmix/random.hpp"

namespace seedmix {
namespace {

// Sub-region centroids sit on a square grid anchored in the US corn belt.
constexpr double kGridLat0 = 38.0;
constexpr double kGridLon0 = -96.0;
constexpr double kGridStepDeg = 0.3;  // ~20 miles in latitude

// Per-attribute spread of the sub-region baselines and the trend magnitude.
constexpr std::array<double, kWeatherCount> kBaseMid{17.0, 850.0, 16.0};
constexpr std::array<double, kWeatherCount> kBaseSpread{5.0, 250.0, 3.0};
constexpr std::array<double, kWeatherCount> kTrendMax{0.08, 6.0, 0.05};

constexpr std::array<double, kSoilCount> kSoilLo{5.8, 1.5, 8.0};
constexpr std::array<double, kSoilCount> kSoilHi{7.2, 4.5, 26.0};

std::string numbered(char prefix, std::size_t value, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%0*zu", prefix, width, value);
  return buf;
}

}  // namespace

void validate(const GenConfig& config) {
  if (config.n_subregions < 1) throw ArgumentError("n_subregions must be >= 1");
  if (config.n_varieties < 1) throw ArgumentError("n_varieties must be >= 1");
  if (config.last_year - config.first_year + 1 < 3) {
    throw ArgumentError("year range must cover at least 3 years");
  }
  if (!(config.noise_scale >= 0.0) || !std::isfinite(config.noise_scale)) {
    throw ArgumentError("noise_scale must be >= 0");
  }
  if (config.experiments_per_pair < 1) throw ArgumentError("experiments_per_pair must be >= 1");
}

const VarietyResponse& LatentTruth::response(const VarietyId& variety) const {
  const auto it = std::lower_bound(
      responses.begin(), responses.end(), variety,
      [](const VarietyResponse& r, const VarietyId& v) { return r.variety < v; });
  if (it == responses.end() || it->variety != variety) {
    throw KeyError("unknown variety " + variety.code);
  }
  return *it;
}

double LatentTruth::latent_yield(const VarietyId& variety, const Conditions& conditions) const {
  const VarietyResponse& r = response(variety);
  double y = r.peak;
  for (std::size_t d = 0; d < kConditionCount; ++d) {
    const double raw = d < kWeatherCount ? conditions.weather[d]
                                         : conditions.soil[d - kWeatherCount];
    const double z = (raw - ranges.lo[d]) / (ranges.hi[d] - ranges.lo[d]);
    const double dz = z - r.optimum[d];
    y -= r.curvature[d] * dz * dz;
  }
  return std::max(0.0, y);
}

GeneratedData generate(const GenConfig& config) {
  validate(config);
  GeneratedData out;
  Catalog& catalog = out.catalog;
  LatentTruth& truth = out.truth;

  // Independent streams keep each stage stable when another stage changes.
  Rng region_rng(derive_seed(config.seed, 0));
  Rng variety_rng(derive_seed(config.seed, 1));
  Rng experiment_rng(derive_seed(config.seed, 2));

  const auto side = static_cast<std::size_t>(
      std::ceil(std::sqrt(static_cast<double>(config.n_subregions))));
  const int id_width = config.n_subregions >= 10000 ? 6 : 4;
  const double span_lat = kGridStepDeg * static_cast<double>(side);

  for (std::size_t i = 0; i < config.n_subregions; ++i) {
    SubRegion region;
    region.id = numbered('R', i + 1, id_width);
    const std::size_t row = i / side;
    const std::size_t col = i % side;
    region.centroid_lat = kGridLat0 + kGridStepDeg * static_cast<double>(row);
    region.centroid_lon = kGridLon0 + kGridStepDeg * static_cast<double>(col);

    WeatherProcess process;
    // Baselines follow a north-south gradient plus local variation.
    const double north = span_lat > 0 ? static_cast<double>(row) * kGridStepDeg / span_lat : 0.0;
    for (std::size_t a = 0; a < kWeatherCount; ++a) {
      const double gradient = a == 0 ? (0.5 - north) : (north - 0.5);
      process.base[a] = kBaseMid[a] + kBaseSpread[a] * (gradient + region_rng.uniform(-0.5, 0.5));
      process.trend[a] = kTrendMax[a] * region_rng.uniform(-1.0, 1.0);
    }
    for (std::size_t s = 0; s < kSoilCount; ++s) {
      region.soil[s] = region_rng.uniform(kSoilLo[s], kSoilHi[s]);
    }
    for (int year = config.first_year; year <= config.last_year; ++year) {
      for (std::size_t a = 0; a < kWeatherCount; ++a) {
        const double signal =
            process.base[a] + process.trend[a] * static_cast<double>(year - config.first_year);
        const double noise = config.noise_scale * kBaseSpread[a] * region_rng.uniform(-1.0, 1.0);
        region.weather[a][year] = signal + noise;
      }
    }
    truth.weather.emplace(region.id, process);
    catalog.sub_regions.emplace(region.id, std::move(region));
  }

  for (std::size_t v = 0; v < config.n_varieties; ++v) {
    VarietyResponse r;
    r.variety = VarietyId{numbered('V', v + 1, 4)};
    r.peak = variety_rng.uniform(55.0, 70.0);
    for (std::size_t d = 0; d < kConditionCount; ++d) {
      r.optimum[d] = variety_rng.uniform(0.15, 0.85);
      r.curvature[d] = variety_rng.uniform(10.0, 40.0);
    }
    catalog.varieties.insert(r.variety);
    truth.responses.push_back(std::move(r));
  }

  const auto n_years = static_cast<std::uint64_t>(config.last_year - config.first_year + 1);
  for (const auto& [id, region] : catalog.sub_regions) {
    for (const auto& response : truth.responses) {
      for (std::size_t e = 0; e < config.experiments_per_pair; ++e) {
        ExperimentRecord record;
        record.sub_region = id;
        record.year = config.first_year + static_cast<int>(experiment_rng.below(n_years));
        record.variety = response.variety;
        record.conditions = region.conditions_in(record.year);
        const double latent = truth.latent_yield(response.variety, record.conditions);
        const double noise = config.noise_scale * response.peak * experiment_rng.uniform(-1.0, 1.0);
        record.yield = std::max(0.0, latent + noise);
        catalog.experiments.push_back(std::move(record));
      }
    }
  }

  seedmix::validate(catalog);
  return out;
}

}  // namespace seedmix
