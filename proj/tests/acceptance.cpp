// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "oracles.hpp"
#include "seedmix/cohesion.hpp"
#include "seedmix/datagen.hpp"
#include "seedmix/file_util.hpp"
#include "seedmix/forecast.hpp"
#include "seedmix/pipeline.hpp"
#include "seedmix/yield_model.hpp"

namespace seedmix {
namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c, d);
  return buf;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Default-size synthetic region, shared by several checks.
struct Fixture {
  Catalog catalog;
  PipelineConfig config;
  YieldReport yield_report;
  Forest forest;
  SolutionAtlas atlas;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture out;
    out.catalog = generate(GenConfig{}).catalog;
    const auto models = train_forecast_models(out.catalog.sub_regions, out.config);
    out.forest = train_yield_model(out.catalog, out.config, &out.yield_report);
    out.atlas = build_atlas(out.catalog, models, out.forest, out.config);
    return out;
  }();
  return f;
}

Outcome lp_oracle() {
  // Variance terms on small lattices and tau on its grid put every LP vertex
  // on the 0.01 weight grid, so the brute force is exact there.
  const double steps[] = {0.05, 0.1, 0.25, 0.5};
  Rng rng(20240601);
  std::size_t instances = 0, mismatches = 0, grid_above = 0;
  double worst = 0.0, solver_seconds = 0.0;
  const auto start = Clock::now();
  for (std::size_t k = 1; k <= kMaxTopK; ++k) {
    for (int rep = 0; rep < 12; ++rep) {
      const double step = steps[rng.below(4)];
      const double base = 0.1 * static_cast<double>(rng.below(step > 0.3 ? 1 : 5));
      std::vector<double> e, nv;
      for (std::size_t i = 0; i < k; ++i) {
        e.push_back(std::round(rng.uniform(20.0, 70.0) * 1000.0) / 1000.0);
        nv.push_back(base + step * static_cast<double>(rng.below(3)));
      }
      const double tau = tau_grid()[rng.below(kTauSteps)];
      const auto stats = testing::raw_stats(e, nv);
      const auto t0 = Clock::now();
      const auto got = optimize_subregion(stats, tau);
      solver_seconds += seconds_since(t0);
      const auto grid = testing::grid_oracle(e, nv, tau);
      ++instances;
      if (got.has_value() != grid.has_value()) {
        ++mismatches;
        continue;
      }
      if (!got) continue;
      const double gap = std::abs(got->expected_yield - grid->objective);
      worst = std::max(worst, gap);
      if (gap > 1e-6) ++mismatches;
      if (grid->objective > got->expected_yield + 1e-9) ++grid_above;
    }
  }
  // Off-lattice instances against the LP dual.
  std::size_t dual_mismatches = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t k = 1 + rng.below(kMaxTopK);
    std::vector<double> e, nv;
    for (std::size_t i = 0; i < k; ++i) {
      e.push_back(rng.uniform(20.0, 70.0));
      nv.push_back(rng.uniform());
    }
    const double tau = tau_grid()[rng.below(kTauSteps)];
    const auto got = optimize_subregion(testing::raw_stats(e, nv), tau);
    const auto dual = testing::dual_oracle(e, nv, tau);
    if (got.has_value() != dual.has_value() || (got && std::abs(got->expected_yield - *dual) > 1e-6)) {
      ++dual_mismatches;
    }
  }
  const double total = seconds_since(start);
  Outcome o;
  o.pass = instances >= 100 && mismatches == 0 && grid_above == 0 && dual_mismatches == 0 && total < 60.0;
  o.detail = std::to_string(instances) + " grid instances, " + std::to_string(mismatches) +
             " mismatches, max gap " + fmt("%.2e", worst) + "; 200 dual instances, " +
             std::to_string(dual_mismatches) + " mismatches; solver " + fmt("%.3f", solver_seconds) +
             " s, total " + fmt("%.1f", total) + " s";
  return o;
}

Outcome constraint_audit() {
  const SolutionAtlas& a = fixture().atlas;
  std::size_t checked = 0, violations = 0;
  const auto check = [&](const SubRegionResult& r, const PortfolioSolution& s, double tau) {
    ++checked;
    double total = 0.0, variability = 0.0;
    for (const auto& entry : s.entries) {
      total += entry.weight;
      const VarietyStats* stats = r.stats_for(entry.variety);
      if (!stats || entry.weight < kMinWeight - 1e-9) {
        ++violations;
        return;
      }
      variability += entry.weight * stats->norm_var;
    }
    if (s.entries.empty() || s.entries.size() > kMaxMix || std::abs(total - 1.0) > 1e-9 ||
        variability > tau + 1e-9) {
      ++violations;
    }
  };
  for (const auto& r : a.subregions) {
    for (const auto& entry : r.sweep) {
      if (entry.solution) check(r, *entry.solution, entry.tau);
    }
    if (r.default_solution) check(r, *r.default_solution, r.default_solution->tau);
  }
  const auto library = audit_atlas(a);
  Outcome o;
  o.pass = checked > 0 && violations == 0 && library.empty();
  o.detail = std::to_string(checked) + " solutions over " + std::to_string(a.subregions.size()) +
             " sub-regions, " + std::to_string(violations) + " violations";
  return o;
}

Outcome tau_monotonicity() {
  const SolutionAtlas& a = fixture().atlas;
  std::size_t bad = 0;
  for (const auto& r : a.subregions) {
    double previous = -std::numeric_limits<double>::infinity();
    for (const auto& entry : r.sweep) {
      const double value =
          entry.solution ? entry.solution->expected_yield : -std::numeric_limits<double>::infinity();
      if (value < previous - 1e-12) ++bad;
      previous = value;
    }
  }
  Outcome o;
  o.pass = bad == 0 && !a.subregions.empty();
  o.detail = std::to_string(a.subregions.size()) + " sub-regions, " + std::to_string(bad) + " decreases";
  return o;
}

Outcome gradient_check() {
  Rng rng(77);
  const double h = 1e-6;
  double worst = 0.0;
  const int configs = 24;
  for (int trial = 0; trial < configs; ++trial) {
    const std::size_t hidden = 1 + rng.below(6);
    const std::size_t length = 2 + rng.below(8);
    SequenceModel m(hidden, MinMax{0, 1});
    for (double& p : m.parameters()) p = rng.uniform(-0.7, 0.7);
    std::vector<SequencePair> pairs;
    for (std::size_t i = 0, n = 1 + rng.below(4); i < n; ++i) {
      SequencePair sp;
      for (std::size_t t = 0; t < length; ++t) sp.input.push_back(rng.uniform());
      sp.target = rng.uniform();
      pairs.push_back(sp);
    }
    std::vector<double> analytic;
    loss_and_gradient(m, pairs, &analytic);
    auto params = m.parameters();
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double saved = params[i];
      params[i] = saved + h;
      const double up = loss_and_gradient(m, pairs, nullptr);
      params[i] = saved - h;
      const double down = loss_and_gradient(m, pairs, nullptr);
      params[i] = saved;
      const double numeric = (up - down) / (2 * h);
      diff += (analytic[i] - numeric) * (analytic[i] - numeric);
      na += analytic[i] * analytic[i];
      nn += numeric * numeric;
    }
    worst = std::max(worst, std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-12}));
  }
  Outcome o;
  o.pass = worst < 1e-4;
  o.detail = std::to_string(configs) + " configurations, max relative error " + fmt("%.2e", worst);
  return o;
}

Outcome forecast_learning() {
  GenConfig g;
  g.n_subregions = 150;
  g.noise_scale = 0.05;
  const Catalog catalog = generate(g).catalog;
  std::vector<ForecastReport> reports;
  train_forecast_models(catalog.sub_regions, PipelineConfig{}, &reports);
  bool pass = reports.size() == kWeatherCount;
  std::string detail;
  for (const auto& r : reports) {
    const double valid = r.valid_n_rmse.value_or(1e9);
    const double test = r.test_n_rmse.value_or(1e9);
    pass = pass && valid < 5.0 && test < 5.0;
    if (!detail.empty()) detail += "; ";
    detail += r.attribute + " valid " + fmt("%.2f", valid) + "% test " + fmt("%.2f", test) + "%";
  }
  return Outcome{pass, detail};
}

Outcome classifier_sanity() {
  // Two yield classes separated by temperature alone.
  Rng rng(3);
  std::vector<ExperimentRecord> separable;
  for (int i = 0; i < 400; ++i) {
    ExperimentRecord r;
    r.sub_region = "R1";
    r.year = 2010;
    r.variety = VarietyId{i % 2 ? "V1" : "V2"};
    const double t = rng.uniform(5.0, 25.0);
    r.conditions.weather = {t, rng.uniform(500.0, 1200.0), rng.uniform(12.0, 20.0)};
    r.conditions.soil = {rng.uniform(5.5, 7.5), rng.uniform(1.0, 5.0), rng.uniform(5.0, 30.0)};
    r.yield = t < 15.0 ? 10.0 : 30.0;
    separable.push_back(r);
  }
  const std::vector<double> ends{10.0, 30.0};
  const Forest sep = train_forest(separable, fit_bins(ends, 2), ForestConfig{});
  const double oob = sep.oob_accuracy.value_or(0.0);

  // Every distribution in the atlas plus random queries against its forest.
  const Fixture& f = fixture();
  std::size_t sums = 0;
  double worst_sum = 0.0;
  const auto track = [&](const std::vector<double>& d) {
    ++sums;
    worst_sum = std::max(worst_sum, std::abs(std::accumulate(d.begin(), d.end(), 0.0) - 1.0));
  };
  for (const auto& r : f.atlas.subregions) {
    for (const auto& t : r.topk) track(t.distribution);
  }
  for (int i = 0; i < 500; ++i) {
    const WeatherValues w{rng.uniform(0, 35), rng.uniform(0, 1500), rng.uniform(5, 25)};
    const SoilValues s{rng.uniform(4, 9), rng.uniform(0, 8), rng.uniform(0, 40)};
    const auto& v = f.forest.varieties[rng.below(f.forest.varieties.size())];
    track(predict_distribution(f.forest, w, s, v).probs);
  }

  GenConfig g;
  g.n_subregions = 200;
  g.n_varieties = 10;
  g.experiments_per_pair = 4;
  YieldReport report;
  train_yield_model(generate(g).catalog, PipelineConfig{}, &report);
  const double test_nrmse = report.test ? report.test->n_rmse : 1e9;
  const double default_nrmse = f.yield_report.test ? f.yield_report.test->n_rmse : 1e9;

  Outcome o;
  o.pass = oob > 0.9 && worst_sum <= 1e-9 && sums > 0 && test_nrmse < 10.0;
  o.detail = "oob " + fmt("%.3f", oob) + "; " + std::to_string(sums) + " distributions, max |sum-1| " +
             fmt("%.1e", worst_sum) + "; test n-rmse " + fmt("%.2f", test_nrmse) +
             "% (200x10 sub-regions x varieties, 4 per pair); 50x20, 2 per pair: " +
             fmt("%.2f", default_nrmse) + "%";
  return o;
}

Outcome spatial_cohesion() {
  const VarietyId a{"A"}, b{"B"}, c{"C"};
  std::map<std::string, PortfolioSolution> held;
  const SolutionLookup lookup = [&](std::string_view id) -> const PortfolioSolution* {
    const auto it = held.find(std::string(id));
    return it == held.end() ? nullptr : &it->second;
  };
  const auto hood = [](std::vector<std::string> ids) { return Neighborhood{"X", 50.0, std::move(ids)}; };

  const auto mix = testing::make_solution({{a, 0.3}, {b, 0.3}, {c, 0.4}});
  held = {{"N1", mix}, {"N2", mix}};
  const double identical = sc_score(mix, hood({"N1", "N2"}), lookup);
  held = {{"N1", testing::make_solution({{c, 1.0}})}};
  const double disjoint = sc_score(testing::make_solution({{a, 0.5}, {b, 0.5}}), hood({"N1"}), lookup);
  held = {{"N1", testing::make_solution({{a, 0.4}, {c, 0.6}})},
          {"N2", testing::make_solution({{a, 0.2}, {b, 0.3}, {c, 0.5}})}};
  const double worked = sc_score(testing::make_solution({{a, 0.5}, {b, 0.5}}), hood({"N1", "N2"}), lookup);

  // Atlas values in range and equal to a from-scratch recomputation.
  const SolutionAtlas& atlas = fixture().atlas;
  std::size_t values = 0, out_of_range = 0, disagreements = 0;
  const auto miles = [](const SubRegionResult& p, const SubRegionResult& q) {
    const double rad = std::acos(-1.0) / 180.0;
    const double dlat = (q.lat - p.lat) * rad, dlon = (q.lon - p.lon) * rad;
    const double h = std::pow(std::sin(dlat / 2), 2) +
                     std::cos(p.lat * rad) * std::cos(q.lat * rad) * std::pow(std::sin(dlon / 2), 2);
    return 2 * 3958.8 * std::asin(std::min(1.0, std::sqrt(h)));
  };
  for (const auto& r : atlas.subregions) {
    for (const auto& v : r.sc) {
      if (!v) continue;
      ++values;
      if (*v < 0.0 || *v > 0.2) ++out_of_range;
    }
    if (!r.sc_default || !r.default_solution) continue;
    ++values;
    if (*r.sc_default < 0.0 || *r.sc_default > 0.2) ++out_of_range;
    std::vector<const SubRegionResult*> neighbors;
    for (const auto& q : atlas.subregions) {
      if (q.id != r.id && miles(r, q) <= atlas.config.value("radius_miles", 50.0)) neighbors.push_back(&q);
    }
    double expect = 0.0;
    if (!neighbors.empty()) {
      for (const auto& entry : r.default_solution->entries) {
        double sum = 0.0;
        for (const auto* q : neighbors) {
          if (q->default_solution) sum += q->default_solution->weight_of(entry.variety).value_or(0.0);
        }
        expect += sum / static_cast<double>(neighbors.size());
      }
      expect /= 5.0;
    }
    if (std::abs(expect - *r.sc_default) > 1e-12) ++disagreements;
  }

  Outcome o;
  o.pass = identical == 0.2 && disjoint == 0.0 && std::abs(worked - 0.09) <= 1e-12 && values > 0 &&
           out_of_range == 0 && disagreements == 0;
  o.detail = "identical " + fmt("%.17g", identical) + ", disjoint " + fmt("%g", disjoint) +
             ", worked example " + fmt("%.17g", worked) + "; " + std::to_string(values) +
             " atlas values, " + std::to_string(out_of_range) + " out of [0, 0.2], " +
             std::to_string(disagreements) + " differ from recomputation";
  return o;
}

struct CliRun {
  int code = 0;
  std::string out;
};

CliRun cli_run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != 0) std::fprintf(stderr, "%s", err.str().c_str());
  return CliRun{code, out.str()};
}

// Full gen -> train -> build-atlas chain in `dir`.
bool chain(const std::filesystem::path& dir, const std::string& threads) {
  const std::string cfg = (dir / "seedmix.cfg").string();
  return cli_run({"gen", "--out", dir.string(), "--seed", "11", "--write-config"}).code == 0 &&
         cli_run({"train-forecast", "--config", cfg, "--threads", threads}).code == 0 &&
         cli_run({"train-yield", "--config", cfg, "--threads", threads}).code == 0 &&
         cli_run({"build-atlas", "--config", cfg, "--threads", threads, "--out",
                  (dir / "atlas.json").string()})
                 .code == 0;
}

Outcome determinism(const testing::TempDir& work) {
  const auto one = work / "run1";
  const auto two = work / "run2";
  if (!chain(one, "1") || !chain(two, "4")) return Outcome{false, "pipeline run failed"};
  const std::string x = read_text_file(one / "atlas.json");
  const std::string y = read_text_file(two / "atlas.json");
  Outcome o;
  o.pass = !x.empty() && x == y;
  o.detail = "atlas " + std::to_string(x.size()) + " bytes, threads 1 vs 4, " +
             (x == y ? "identical" : "different");
  return o;
}

Outcome comparison(const testing::TempDir& work) {
  const auto atlas = work / "run1/atlas.json";
  if (!std::filesystem::exists(atlas)) return Outcome{false, "no atlas to report on"};
  const CliRun report = cli_run({"report", "--atlas", atlas.string()});
  std::map<std::string, double> values;
  std::istringstream lines(report.out);
  for (std::string line; std::getline(lines, line);) {
    const auto colon = line.find(": ");
    if (colon == std::string::npos) continue;
    try {
      values[line.substr(0, colon)] = std::stod(line.substr(colon + 2));
    } catch (const std::exception&) {
    }
  }
  const char* keys[] = {"differentiated_mean_yield", "differentiated_yield_variance", "common_mean_yield",
                        "common_yield_variance"};
  bool pass = report.code == 0;
  for (const char* key : keys) pass = pass && values.contains(key) && std::isfinite(values[key]);
  if (!pass) return Outcome{false, "report missing comparison lines"};
  return Outcome{true, "differentiated mean " + fmt("%.3f", values[keys[0]]) + " var " +
                           fmt("%.3f", values[keys[1]]) + "; common mean " +
                           fmt("%.3f", values[keys[2]]) + " var " + fmt("%.3f", values[keys[3]]) +
                           " over " + fmt("%g", values["compared_subregions"]) + " sub-regions"};
}

}  // namespace
}  // namespace seedmix

int main() {
  using namespace seedmix;
  testing::TempDir work;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> checks{
      {"lp-oracle-equivalence", lp_oracle},
      {"constraint-audit", constraint_audit},
      {"tau-monotonicity", tau_monotonicity},
      {"gradient-check", gradient_check},
      {"forecast-learning", forecast_learning},
      {"classifier-sanity", classifier_sanity},
      {"spatial-cohesion", spatial_cohesion},
      {"determinism", [&] { return determinism(work); }},
      {"differentiated-vs-common", [&] { return comparison(work); }},
  };
  int failures = 0;
  for (const auto& [name, check] : checks) {
    const auto start = Clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = Outcome{false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), seconds_since(start));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
