#include "seedmix/atlas.hpp"

#include <algorithm>
#include <cmath>

#include "seedmix/errors.hpp"

namespace seedmix {
namespace {

using nlohmann::json;

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> read_optional(const json& node) {
  if (node.is_null()) return std::nullopt;
  return node.get<double>();
}

json summary_json(const RegionSummary& s) {
  return json{{"subregions", s.subregions},
              {"solved", s.solved},
              {"average_yield", s.average_yield},
              {"average_sd", s.average_sd},
              {"average_offset_pct", s.average_offset_pct}};
}

RegionSummary summary_from_json(const json& node) {
  RegionSummary s;
  s.subregions = node.at("subregions").get<std::size_t>();
  s.solved = node.at("solved").get<std::size_t>();
  s.average_yield = node.at("average_yield").get<double>();
  s.average_sd = node.at("average_sd").get<double>();
  s.average_offset_pct = node.at("average_offset_pct").get<double>();
  return s;
}

PortfolioSolution solution_from_json(const json& node, const SubRegionResult& owner) {
  PortfolioSolution s;
  s.tau = node.at("tau").get<double>();
  for (const auto& e : node.at("entries")) {
    MixEntry entry;
    entry.variety = VarietyId{e.at("variety_id").get<std::string>()};
    entry.weight = e.at("weight").get<double>();
    const VarietyStats* stats = owner.stats_for(entry.variety);
    if (!stats) {
      throw SchemaError("solution of " + owner.id + " references variety " + entry.variety.code +
                        " without stats");
    }
    entry.e = stats->e;
    entry.var = stats->var;
    entry.norm_var = stats->norm_var;
    s.entries.push_back(std::move(entry));
  }
  s.expected_yield = node.at("expected_yield").get<double>();
  s.variability = node.at("variability").get<double>();
  s.sd = node.at("sd").get<double>();
  s.offset_pct = node.at("offset_pct").get<double>();
  return s;
}

json subregion_json(const SubRegionResult& r) {
  json soil = json::object();
  for (std::size_t i = 0; i < kSoilCount; ++i) soil[std::string(kSoilAttributes[i])] = r.soil[i];
  json forecast = json::object();
  json history = json::object();
  history["first_year"] = r.weather_history[0].empty() ? 0 : r.weather_history[0].begin()->first;
  for (std::size_t a = 0; a < kWeatherCount; ++a) {
    const std::string name(kWeatherAttributes[a]);
    forecast[name] = r.forecast[a];
    std::vector<double> values;
    for (const auto& [year, v] : r.weather_history[a]) values.push_back(v);
    history[name] = values;
  }
  json stats = json::array();
  for (const auto& s : r.stats) {
    stats.push_back(json{{"variety_id", s.variety.code},
                         {"e", s.e},
                         {"var", s.var},
                         {"norm_e", s.norm_e},
                         {"norm_var", s.norm_var}});
  }
  json topk = json::array();
  for (const auto& t : r.topk) {
    topk.push_back(json{{"variety_id", t.stats.variety.code},
                        {"score", t.score},
                        {"distribution", t.distribution}});
  }
  json solutions = json::array();
  for (const auto& entry : r.sweep) {
    solutions.push_back(entry.solution ? to_json(*entry.solution, r.id) : json(nullptr));
  }
  json sc = json::array();
  for (const auto& v : r.sc) sc.push_back(optional_number(v));
  return json{{"id", r.id},
              {"lat", r.lat},
              {"lon", r.lon},
              {"soil", soil},
              {"weather_history", history},
              {"forecast", forecast},
              {"stats", stats},
              {"topk", topk},
              {"solutions", solutions},
              {"default_solution",
               r.default_solution ? to_json(*r.default_solution, r.id) : json(nullptr)},
              {"sc", sc},
              {"sc_default", optional_number(r.sc_default)},
              {"neighbor_count", r.neighbor_count}};
}

SubRegionResult subregion_from_json(const json& node) {
  SubRegionResult r;
  r.id = node.at("id").get<std::string>();
  r.lat = node.at("lat").get<double>();
  r.lon = node.at("lon").get<double>();
  for (std::size_t i = 0; i < kSoilCount; ++i) {
    r.soil[i] = node.at("soil").at(std::string(kSoilAttributes[i])).get<double>();
  }
  const json& history = node.at("weather_history");
  const int first_year = history.at("first_year").get<int>();
  for (std::size_t a = 0; a < kWeatherCount; ++a) {
    const std::string name(kWeatherAttributes[a]);
    r.forecast[a] = node.at("forecast").at(name).get<double>();
    const auto values = history.at(name).get<std::vector<double>>();
    for (std::size_t y = 0; y < values.size(); ++y) {
      r.weather_history[a][first_year + static_cast<int>(y)] = values[y];
    }
  }
  for (const auto& s : node.at("stats")) {
    r.stats.push_back(VarietyStats{VarietyId{s.at("variety_id").get<std::string>()},
                                   s.at("e").get<double>(), s.at("var").get<double>(),
                                   s.at("norm_e").get<double>(), s.at("norm_var").get<double>()});
  }
  for (const auto& t : node.at("topk")) {
    const VarietyId id{t.at("variety_id").get<std::string>()};
    const VarietyStats* stats = r.stats_for(id);
    if (!stats) throw SchemaError("top-k of " + r.id + " references unknown variety " + id.code);
    r.topk.push_back(TopKEntry{*stats, t.at("score").get<double>(),
                               t.at("distribution").get<std::vector<double>>()});
  }
  const auto& grid = tau_grid();
  const json& solutions = node.at("solutions");
  if (solutions.size() != grid.size()) throw SchemaError("solutions must cover the tau grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    TauEntry entry{grid[i], std::nullopt};
    if (!solutions[i].is_null()) entry.solution = solution_from_json(solutions[i], r);
    r.sweep.push_back(std::move(entry));
  }
  if (const json& d = node.at("default_solution"); !d.is_null()) {
    r.default_solution = solution_from_json(d, r);
  }
  for (const auto& v : node.at("sc")) r.sc.push_back(read_optional(v));
  r.sc_default = read_optional(node.at("sc_default"));
  r.neighbor_count = node.at("neighbor_count").get<std::size_t>();
  return r;
}

}  // namespace

const PortfolioSolution* SubRegionResult::solution_at(std::size_t tau_idx) const {
  if (tau_idx >= sweep.size() || !sweep[tau_idx].solution) return nullptr;
  return &*sweep[tau_idx].solution;
}

const VarietyStats* SubRegionResult::stats_for(const VarietyId& variety) const {
  const auto it = std::lower_bound(
      stats.begin(), stats.end(), variety,
      [](const VarietyStats& s, const VarietyId& v) { return s.variety < v; });
  if (it == stats.end() || it->variety != variety) return nullptr;
  return &*it;
}

RegionSummary summarize(const std::vector<const PortfolioSolution*>& solutions,
                        std::size_t subregions) {
  RegionSummary s;
  s.subregions = subregions;
  for (const PortfolioSolution* p : solutions) {
    if (!p) continue;
    ++s.solved;
    s.average_yield += p->expected_yield;
    s.average_sd += p->sd;
    s.average_offset_pct += p->offset_pct;
  }
  if (s.solved > 0) {
    const auto n = static_cast<double>(s.solved);
    s.average_yield /= n;
    s.average_sd /= n;
    s.average_offset_pct /= n;
  }
  return s;
}

const SubRegionResult* SolutionAtlas::find(std::string_view id) const {
  const auto it = std::lower_bound(
      subregions.begin(), subregions.end(), id,
      [](const SubRegionResult& r, std::string_view key) { return r.id < key; });
  if (it == subregions.end() || it->id != id) return nullptr;
  return &*it;
}

RegionSummary SolutionAtlas::summary_at(std::size_t tau_idx) const {
  std::vector<const PortfolioSolution*> solutions;
  for (const auto& r : subregions) solutions.push_back(r.solution_at(tau_idx));
  return summarize(solutions, subregions.size());
}

nlohmann::json to_json(const PortfolioSolution& s, std::string_view sub_region_id) {
  json entries = json::array();
  for (const auto& e : s.entries) {
    entries.push_back(json{{"variety_id", e.variety.code}, {"weight", e.weight}});
  }
  return json{{"sub_region_id", sub_region_id},
              {"tau", s.tau},
              {"entries", entries},
              {"expected_yield", s.expected_yield},
              {"variability", s.variability},
              {"sd", s.sd},
              {"offset_pct", s.offset_pct}};
}

nlohmann::json to_json(const RegionSummary& summary) { return summary_json(summary); }

nlohmann::json to_json(const SolutionAtlas& atlas) {
  json varieties = json::array();
  for (const auto& v : atlas.varieties) varieties.push_back(v.code);
  json subregions = json::array();
  for (const auto& r : atlas.subregions) subregions.push_back(subregion_json(r));
  return json{{"format", "seedmix.atlas"},
              {"version", kAtlasVersion},
              {"config", atlas.config},
              {"target_year", atlas.target_year},
              {"scheme", {{"r", atlas.scheme.r}, {"lo", atlas.scheme.lo}, {"hi", atlas.scheme.hi}}},
              {"varieties", varieties},
              {"summary", summary_json(atlas.summary)},
              {"subregions", subregions}};
}

SolutionAtlas atlas_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format").get<std::string>() != "seedmix.atlas") throw SchemaError("not an atlas document");
    if (doc.at("version").get<int>() != kAtlasVersion) throw SchemaError("unsupported atlas version");
    SolutionAtlas atlas;
    atlas.config = doc.at("config");
    atlas.target_year = doc.at("target_year").get<int>();
    const json& scheme = doc.at("scheme");
    atlas.scheme = make_bins(scheme.at("lo").get<double>(), scheme.at("hi").get<double>(),
                             scheme.at("r").get<std::size_t>());
    for (const auto& v : doc.at("varieties")) atlas.varieties.push_back(VarietyId{v.get<std::string>()});
    atlas.summary = summary_from_json(doc.at("summary"));
    for (const auto& node : doc.at("subregions")) atlas.subregions.push_back(subregion_from_json(node));
    if (!std::is_sorted(atlas.subregions.begin(), atlas.subregions.end(),
                        [](const auto& a, const auto& b) { return a.id < b.id; })) {
      throw SchemaError("atlas sub-regions must be sorted by id");
    }
    return atlas;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed atlas: ") + e.what());
  }
}

std::string serialize_atlas(const SolutionAtlas& atlas) { return to_json(atlas).dump(1) + "\n"; }

SolutionAtlas parse_atlas(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("atlas is not valid JSON: ") + e.what());
  }
  return atlas_from_json(doc);
}

std::vector<std::string> audit_atlas(const SolutionAtlas& atlas) {
  std::vector<std::string> problems;
  std::vector<const PortfolioSolution*> defaults;
  for (const auto& r : atlas.subregions) {
    for (const auto& entry : r.sweep) {
      if (!entry.solution) continue;
      if (auto why = check_solution(*entry.solution)) {
        problems.push_back(r.id + " tau " + std::to_string(entry.tau) + ": " + *why);
      }
    }
    if (r.default_solution) {
      if (auto why = check_solution(*r.default_solution)) problems.push_back(r.id + " default: " + *why);
    }
    defaults.push_back(r.default_solution ? &*r.default_solution : nullptr);
  }
  const RegionSummary recomputed = summarize(defaults, atlas.subregions.size());
  const auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a)); };
  if (recomputed.solved != atlas.summary.solved || !close(recomputed.average_yield, atlas.summary.average_yield) ||
      !close(recomputed.average_sd, atlas.summary.average_sd) ||
      !close(recomputed.average_offset_pct, atlas.summary.average_offset_pct)) {
    problems.push_back("region summary does not match per-sub-region records");
  }
  return problems;
}

}  // namespace seedmix
