#include "seedmix/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "seedmix/cohesion.hpp"
#include "seedmix/errors.hpp"
#include "seedmix/parallel.hpp"
#include "seedmix/random.hpp"
#include "seedmix/split.hpp"

namespace seedmix {
namespace {

// Last year observed by every sub-region.
int common_last_year(const RegionMap& regions) {
  if (regions.empty()) throw ArgumentError("catalog has no sub-regions");
  int last = regions.begin()->second.last_year();
  for (const auto& [id, r] : regions) last = std::min(last, r.last_year());
  return last;
}

std::optional<double> try_n_rmse(const SequenceModel& model, const std::vector<SequencePair>& pairs) {
  if (pairs.size() < 2) return std::nullopt;
  try {
    return evaluate_n_rmse(model, pairs);
  } catch (const DegenerateRangeError&) {
    return std::nullopt;
  }
}

std::optional<ClassifierReport> try_evaluate(const Forest& forest,
                                             const std::vector<ExperimentRecord>& records) {
  if (records.size() < 2) return std::nullopt;
  try {
    return evaluate_forest(forest, records);
  } catch (const DegenerateRangeError&) {
    return std::nullopt;
  }
}

MixPerformance performance(const std::vector<double>& yields, const std::vector<double>& sds) {
  MixPerformance p;
  p.subregions = yields.size();
  if (yields.empty()) return p;
  const auto n = static_cast<double>(yields.size());
  for (std::size_t i = 0; i < yields.size(); ++i) {
    p.mean_yield += yields[i];
    p.mean_sd += sds[i];
  }
  p.mean_yield /= n;
  p.mean_sd /= n;
  for (double y : yields) p.yield_variance += (y - p.mean_yield) * (y - p.mean_yield);
  p.yield_variance /= n;
  return p;
}

double divisor_value(AverageDivisor divisor, std::size_t entries) {
  return divisor == AverageDivisor::five ? static_cast<double>(kMaxMix)
                                         : static_cast<double>(entries);
}

}  // namespace

ForecastModels train_forecast_models(const RegionMap& regions, const PipelineConfig& config,
                                     std::vector<ForecastReport>* reports) {
  validate(config);
  const int target = common_last_year(regions);
  ForecastModels models;
  std::vector<std::optional<SequenceModel>> trained(kWeatherCount);
  std::vector<ForecastReport> local(kWeatherCount);

  parallel_for(kWeatherCount, config.threads, [&](std::size_t a) {
    const auto pairs = make_sequences(regions, a, target);
    const auto split = split_dataset(pairs, SplitRatios{}, config.split_seed);
    TrainConfig tc = config.forecast;
    tc.seed = derive_seed(config.forecast.seed, a);
    const std::vector<SequencePair>& fit_on = split.train.empty() ? pairs : split.train;
    SequenceModel model = train(fit_on, tc);

    ForecastReport& report = local[a];
    report.attribute = std::string(kWeatherAttributes[a]);
    report.train_size = fit_on.size();
    report.valid_size = split.valid.size();
    report.test_size = split.test.size();
    report.train_n_rmse = try_n_rmse(model, fit_on).value_or(0.0);
    report.valid_n_rmse = try_n_rmse(model, split.valid);
    report.test_n_rmse = try_n_rmse(model, split.test);
    trained[a] = std::move(model);
  });

  for (std::size_t a = 0; a < kWeatherCount; ++a) {
    models.by_attribute.emplace(std::string(kWeatherAttributes[a]), std::move(*trained[a]));
  }
  if (reports) *reports = std::move(local);
  return models;
}

Forest train_yield_model(const Catalog& catalog, const PipelineConfig& config, YieldReport* report) {
  validate(config);
  if (catalog.experiments.empty()) throw ArgumentError("catalog has no experiments");
  std::vector<double> yields;
  yields.reserve(catalog.experiments.size());
  for (const auto& r : catalog.experiments) yields.push_back(r.yield);
  const BinScheme scheme = fit_bins(yields, config.bins);

  const auto split = split_dataset(catalog.experiments, SplitRatios{}, config.split_seed);
  ForestConfig fc = config.forest;
  fc.threads = config.threads;
  Forest forest = train_forest(split.train, scheme, fc);

  if (report) {
    report->train_size = split.train.size();
    report->valid_size = split.valid.size();
    report->test_size = split.test.size();
    report->oob_accuracy = forest.oob_accuracy;
    report->valid = try_evaluate(forest, split.valid);
    report->test = try_evaluate(forest, split.test);
  }
  return forest;
}

std::vector<SubRegionPrediction> predict_subregions(const Catalog& catalog,
                                                    const ForecastModels& models,
                                                    const Forest& forest,
                                                    const PipelineConfig& config,
                                                    int target_year) {
  std::vector<const SubRegion*> regions;
  for (const auto& [id, r] : catalog.sub_regions) regions.push_back(&r);
  std::array<const SequenceModel*, kWeatherCount> by_attribute{};
  for (std::size_t a = 0; a < kWeatherCount; ++a) by_attribute[a] = &models.at(kWeatherAttributes[a]);

  std::vector<SubRegionPrediction> out(regions.size());
  parallel_for(regions.size(), config.threads, [&](std::size_t i) {
    const SubRegion& region = *regions[i];
    SubRegionPrediction& p = out[i];
    SubRegionResult& r = p.result;
    r.id = region.id;
    r.lat = region.centroid_lat;
    r.lon = region.centroid_lon;
    r.weather_history = region.weather;
    r.soil = region.soil;
    const int first = region.first_year();
    for (std::size_t a = 0; a < kWeatherCount; ++a) {
      std::vector<double> sequence;
      for (int year = first; year < target_year; ++year) {
        const auto it = region.weather[a].find(year);
        if (it == region.weather[a].end()) {
          throw DataGapError("sub-region " + region.id + " is missing " +
                             std::string(kWeatherAttributes[a]) + " for year " + std::to_string(year));
        }
        sequence.push_back(it->second);
      }
      r.forecast[a] = predict_next(*by_attribute[a], sequence);
    }
    std::vector<YieldDistribution> distributions;
    distributions.reserve(forest.varieties.size());
    for (const auto& variety : forest.varieties) {
      distributions.push_back(predict_distribution(forest, r.forecast, r.soil, variety));
    }
    r.stats = make_stats(forest.varieties, distributions);
    for (auto& d : distributions) p.distributions.push_back(std::move(d.probs));
  });
  return out;
}

SolutionAtlas solve_atlas(std::vector<SubRegionPrediction> predictions, const PipelineConfig& config,
                          int target_year, const BinScheme& scheme) {
  validate(config);
  std::sort(predictions.begin(), predictions.end(),
            [](const auto& a, const auto& b) { return a.result.id < b.result.id; });
  for (std::size_t i = 1; i < predictions.size(); ++i) {
    if (predictions[i].result.id == predictions[i - 1].result.id) {
      throw ConflictError("duplicate sub-region " + predictions[i].result.id);
    }
  }

  SolutionAtlas atlas;
  atlas.config = snapshot(config);
  atlas.target_year = target_year;
  atlas.scheme = scheme;

  const std::size_t n = predictions.size();
  parallel_for(n, config.threads, [&](std::size_t i) {
    SubRegionPrediction& p = predictions[i];
    SubRegionResult& r = p.result;
    std::vector<std::size_t> order(r.stats.size());
    for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return r.stats[a].variety < r.stats[b].variety; });
    std::vector<VarietyStats> sorted_stats;
    std::vector<std::vector<double>> sorted_dists;
    for (std::size_t j : order) {
      sorted_stats.push_back(r.stats[j]);
      if (j < p.distributions.size()) sorted_dists.push_back(p.distributions[j]);
    }
    r.stats = std::move(sorted_stats);
    p.distributions = std::move(sorted_dists);
    const auto best = top_k(r.stats, std::min(config.k, r.stats.size()));
    std::vector<VarietyStats> candidates;
    for (const auto& s : best) {
      TopKEntry entry{s, score(s), {}};
      const auto pos = static_cast<std::size_t>(r.stats_for(s.variety) - r.stats.data());
      if (pos < p.distributions.size()) entry.distribution = p.distributions[pos];
      r.topk.push_back(std::move(entry));
      candidates.push_back(s);
    }
    r.sweep = tau_sweep(candidates, config.divisor);
    try {
      r.default_solution = default_solution(r.sweep);
    } catch (const NoSolutionError&) {
      r.default_solution.reset();
    }
  });

  RegionMap locations;
  for (const auto& p : predictions) {
    SubRegion loc;
    loc.id = p.result.id;
    loc.centroid_lat = p.result.lat;
    loc.centroid_lon = p.result.lon;
    locations.emplace(loc.id, std::move(loc));
  }
  const auto hoods = all_neighborhoods(locations, config.radius_miles);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) index.emplace(predictions[i].result.id, i);

  const auto& grid = tau_grid();
  parallel_for(n, config.threads, [&](std::size_t i) {
    SubRegionResult& r = predictions[i].result;
    const Neighborhood& hood = hoods[i];
    r.neighbor_count = hood.neighbors.size();
    r.sc.assign(grid.size(), std::nullopt);
    if (hood.neighbors.empty()) return;
    for (std::size_t t = 0; t < grid.size(); ++t) {
      const PortfolioSolution* own = r.solution_at(t);
      if (!own) continue;
      const SolutionLookup lookup = [&](std::string_view id) -> const PortfolioSolution* {
        return predictions[index.at(std::string(id))].result.solution_at(t);
      };
      r.sc[t] = sc_score(*own, hood, lookup, config.divisor);
    }
    if (r.default_solution) {
      const SolutionLookup lookup = [&](std::string_view id) -> const PortfolioSolution* {
        const auto& other = predictions[index.at(std::string(id))].result.default_solution;
        return other ? &*other : nullptr;
      };
      r.sc_default = sc_score(*r.default_solution, hood, lookup, config.divisor);
    }
  });

  std::set<VarietyId> varieties;
  std::vector<const PortfolioSolution*> defaults;
  atlas.subregions.reserve(n);
  for (auto& p : predictions) {
    for (const auto& s : p.result.stats) varieties.insert(s.variety);
    atlas.subregions.push_back(std::move(p.result));
  }
  for (const auto& r : atlas.subregions) {
    defaults.push_back(r.default_solution ? &*r.default_solution : nullptr);
  }
  atlas.varieties.assign(varieties.begin(), varieties.end());
  atlas.summary = summarize(defaults, atlas.subregions.size());
  return atlas;
}

SolutionAtlas build_atlas(const Catalog& catalog, const ForecastModels& models, const Forest& forest,
                          const PipelineConfig& config) {
  validate(config);
  const int last = common_last_year(catalog.sub_regions);
  const int target = config.target_year.value_or(last + 1);
  if (target > last + 1) {
    throw ArgumentError("target year " + std::to_string(target) + " is more than one year past the data");
  }
  auto predictions = predict_subregions(catalog, models, forest, config, target);
  return solve_atlas(std::move(predictions), config, target, forest.scheme);
}

std::vector<VarietyPrevalence> prevalence_ranking(const SolutionAtlas& atlas,
                                                  std::optional<std::size_t> tau_idx,
                                                  std::size_t histogram_bins) {
  if (histogram_bins < 1) throw ArgumentError("histogram_bins must be >= 1");
  std::vector<VarietyPrevalence> ranking;
  std::map<VarietyId, std::size_t> slot;
  for (const auto& v : atlas.varieties) {
    slot.emplace(v, ranking.size());
    VarietyPrevalence p;
    p.variety = v;
    p.weights.assign(atlas.subregions.size(), 0.0);
    p.histogram.assign(histogram_bins, 0);
    ranking.push_back(std::move(p));
  }
  for (std::size_t i = 0; i < atlas.subregions.size(); ++i) {
    const SubRegionResult& r = atlas.subregions[i];
    const PortfolioSolution* s =
        tau_idx ? r.solution_at(*tau_idx) : (r.default_solution ? &*r.default_solution : nullptr);
    if (!s) continue;
    for (const auto& entry : s->entries) {
      auto it = slot.find(entry.variety);
      if (it == slot.end()) {
        it = slot.emplace(entry.variety, ranking.size()).first;
        VarietyPrevalence p;
        p.variety = entry.variety;
        p.weights.assign(atlas.subregions.size(), 0.0);
        p.histogram.assign(histogram_bins, 0);
        ranking.push_back(std::move(p));
      }
      ranking[it->second].weights[i] = entry.weight;
    }
  }
  const auto bins = static_cast<double>(histogram_bins);
  for (auto& p : ranking) {
    double sum = 0.0;
    for (double w : p.weights) {
      sum += w;
      if (w > 0.0) {
        ++p.present;
        const double pos = std::ceil(w * bins) - 1.0;
        const auto b = static_cast<std::size_t>(std::clamp(pos, 0.0, bins - 1.0));
        ++p.histogram[b];
      }
    }
    p.expected_weight = p.weights.empty() ? 0.0 : sum / static_cast<double>(p.weights.size());
  }
  std::sort(ranking.begin(), ranking.end(), [](const auto& a, const auto& b) {
    if (a.expected_weight != b.expected_weight) return a.expected_weight > b.expected_weight;
    return a.variety < b.variety;
  });
  return ranking;
}

std::vector<VarietyStats> region_stats(const SolutionAtlas& atlas) {
  std::vector<VarietyStats> stats;
  for (const auto& v : atlas.varieties) {
    double e = 0.0;
    double var = 0.0;
    std::size_t count = 0;
    for (const auto& r : atlas.subregions) {
      if (const VarietyStats* s = r.stats_for(v)) {
        e += s->e;
        var += s->var;
        ++count;
      }
    }
    if (count == 0) continue;
    stats.push_back(VarietyStats{v, e / static_cast<double>(count), var / static_cast<double>(count), 0.0, 0.0});
  }
  normalize_stats(stats);
  return stats;
}

std::optional<CommonSolution> common_solution(const SolutionAtlas& atlas,
                                              std::span<const VarietyId> chosen,
                                              std::optional<double> tau, AverageDivisor divisor) {
  if (chosen.empty() || chosen.size() > kMaxMix) {
    throw ArgumentError("a common solution takes 1 to 5 varieties");
  }
  const std::set<VarietyId> distinct(chosen.begin(), chosen.end());
  if (distinct.size() != chosen.size()) throw ArgumentError("chosen varieties must be distinct");
  if (tau && !(std::isfinite(*tau))) throw ArgumentError("tau must be finite");

  const auto all = region_stats(atlas);
  std::vector<VarietyStats> picked;
  for (const auto& v : chosen) {
    const auto it = std::find_if(all.begin(), all.end(), [&](const auto& s) { return s.variety == v; });
    if (it == all.end()) throw KeyError("unknown variety " + v.code);
    picked.push_back(*it);
  }

  std::optional<PortfolioSolution> solution;
  if (tau) {
    solution = optimize_fixed_subset(picked, *tau, divisor);
  } else {
    const auto sweep = tau_sweep_fixed(picked, divisor);
    try {
      solution = default_solution(sweep);
    } catch (const NoSolutionError&) {
      solution.reset();
    }
  }
  if (!solution) return std::nullopt;

  CommonSolution out;
  out.solution = std::move(*solution);
  out.region_yield = out.solution.expected_yield;
  std::size_t counted = 0;
  for (const auto& r : atlas.subregions) {
    double sd = 0.0;
    bool complete = true;
    for (const auto& entry : out.solution.entries) {
      const VarietyStats* s = r.stats_for(entry.variety);
      if (!s) {
        complete = false;
        break;
      }
      sd += entry.weight * std::sqrt(s->var);
    }
    if (!complete) continue;
    out.mean_subregion_sd += sd / divisor_value(divisor, out.solution.entries.size());
    ++counted;
  }
  if (counted > 0) out.mean_subregion_sd /= static_cast<double>(counted);
  return out;
}

std::vector<std::string> highlight_subregions(const SolutionAtlas& atlas,
                                              const std::set<VarietyId>& varieties,
                                              std::optional<std::pair<double, double>> range,
                                              std::optional<std::size_t> tau_idx) {
  std::vector<std::string> out;
  if (varieties.empty()) return out;
  for (const auto& r : atlas.subregions) {
    const PortfolioSolution* s =
        tau_idx ? r.solution_at(*tau_idx) : (r.default_solution ? &*r.default_solution : nullptr);
    if (!s) continue;
    const bool hit = std::any_of(s->entries.begin(), s->entries.end(), [&](const MixEntry& e) {
      if (!varieties.contains(e.variety)) return false;
      return !range || (e.weight >= range->first && e.weight <= range->second);
    });
    if (hit) out.push_back(r.id);
  }
  return out;
}

std::map<VarietyId, std::size_t> topk_counts(const SolutionAtlas& atlas) {
  std::map<VarietyId, std::size_t> counts;
  for (const auto& r : atlas.subregions) {
    for (const auto& t : r.topk) ++counts[t.stats.variety];
  }
  return counts;
}

std::vector<std::string> topk_members(const SolutionAtlas& atlas, const VarietyId& variety) {
  std::vector<std::string> out;
  for (const auto& r : atlas.subregions) {
    if (std::any_of(r.topk.begin(), r.topk.end(), [&](const TopKEntry& t) { return t.stats.variety == variety; })) {
      out.push_back(r.id);
    }
  }
  return out;
}

SolutionComparison compare_solutions(const SolutionAtlas& atlas, const PortfolioSolution& common,
                                     AverageDivisor divisor) {
  std::vector<double> diff_yield, diff_sd, common_yield, common_sd;
  for (const auto& r : atlas.subregions) {
    if (!r.default_solution) continue;
    double y = 0.0;
    double sd = 0.0;
    bool complete = true;
    for (const auto& entry : common.entries) {
      const VarietyStats* s = r.stats_for(entry.variety);
      if (!s) {
        complete = false;
        break;
      }
      y += entry.weight * s->e;
      sd += entry.weight * std::sqrt(s->var);
    }
    if (!complete) continue;
    diff_yield.push_back(r.default_solution->expected_yield);
    diff_sd.push_back(r.default_solution->sd);
    common_yield.push_back(y);
    common_sd.push_back(sd / divisor_value(divisor, common.entries.size()));
  }
  return SolutionComparison{performance(diff_yield, diff_sd), performance(common_yield, common_sd)};
}

}  // namespace seedmix
