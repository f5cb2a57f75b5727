#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <functional>
#include <optional>

#include "seedmix/atlas.hpp"
#include "seedmix/config.hpp"
#include "seedmix/datagen.hpp"
#include "seedmix/dataset_io.hpp"
#include "seedmix/errors.hpp"
#include "seedmix/file_util.hpp"
#include "seedmix/pipeline.hpp"
#include "seedmix/service.hpp"

namespace seedmix::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct PipelineFlags {
  std::string config;
  std::vector<std::string> settings;
  std::optional<std::size_t> threads;
};

void add_pipeline_flags(CLI::App* cmd, PipelineFlags& flags) {
  cmd->add_option("--config", flags.config, "Pipeline configuration file")->required();
  cmd->add_option("--set", flags.settings, "Override a setting, key=value (repeatable)");
  cmd->add_option("--threads", flags.threads, "Cap on worker threads")->check(CLI::PositiveNumber);
}

RunConfig resolve(const PipelineFlags& flags) {
  RunConfig config = load_run_config(flags.config);
  for (const auto& setting : flags.settings) {
    const auto eq = setting.find('=');
    if (eq == std::string::npos) throw ArgumentError("--set expects key=value, got '" + setting + "'");
    const auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t") + 1);
      return s;
    };
    apply_setting(config, trim(setting.substr(0, eq)), trim(setting.substr(eq + 1)));
  }
  if (flags.threads) apply_setting(config, "threads", std::to_string(*flags.threads));
  validate(config.pipeline);
  if (config.region_csv.empty() || config.experiments_csv.empty()) {
    throw ArgumentError("configuration must set region_csv and experiments_csv");
  }
  return config;
}

Catalog load_inputs(const RunConfig& config, std::ostream& err) {
  Catalog catalog = load_catalog(config.region_csv, config.experiments_csv);
  err << "seedmix: loaded " << catalog.sub_regions.size() << " sub-regions, "
      << catalog.varieties.size() << " varieties, " << catalog.experiments.size() << " experiments\n";
  return catalog;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json forecast_report_json(const std::vector<ForecastReport>& reports) {
  json list = json::array();
  for (const auto& r : reports) {
    list.push_back(json{{"attribute", r.attribute},
                        {"train_size", r.train_size},
                        {"valid_size", r.valid_size},
                        {"test_size", r.test_size},
                        {"train_n_rmse", r.train_n_rmse},
                        {"valid_n_rmse", optional_json(r.valid_n_rmse)},
                        {"test_n_rmse", optional_json(r.test_n_rmse)}});
  }
  return list;
}

json yield_report_json(const YieldReport& r) {
  const auto classifier = [](const std::optional<ClassifierReport>& c) {
    return c ? json{{"accuracy", c->accuracy}, {"n_rmse", c->n_rmse}} : json(nullptr);
  };
  return json{{"train_size", r.train_size},
              {"valid_size", r.valid_size},
              {"test_size", r.test_size},
              {"oob_accuracy", optional_json(r.oob_accuracy)},
              {"valid", classifier(r.valid)},
              {"test", classifier(r.test)}};
}

std::string mix_text(const PortfolioSolution& s) {
  std::string text;
  for (const auto& e : s.entries) {
    if (!text.empty()) text += ',';
    text += e.variety.code + ':' + format_double(e.weight);
  }
  return text;
}

int cmd_gen(const GenConfig& gen, const fs::path& out_dir, bool write_config, std::ostream& out,
            std::ostream& err) {
  validate(gen);
  const GeneratedData data = generate(gen);
  write_catalog(data.catalog, out_dir);
  if (write_config) {
    RunConfig config;
    config.region_csv = "region.csv";
    config.experiments_csv = "experiments.csv";
    config.forecast_model = "forecast.json";
    config.yield_model = "forest.json";
    write_file_atomic(out_dir / "seedmix.cfg", render_run_config(config));
  }
  err << "seedmix: wrote " << data.catalog.sub_regions.size() << " sub-regions and "
      << data.catalog.experiments.size() << " experiments to " << out_dir.string() << '\n';
  out << json{{"region_csv", (out_dir / "region.csv").string()},
              {"experiments_csv", (out_dir / "experiments.csv").string()}}
             .dump()
      << '\n';
  return kExitOk;
}

int cmd_train_forecast(const PipelineFlags& flags, const std::string& out_path, std::ostream& out,
                       std::ostream& err) {
  RunConfig config = resolve(flags);
  const fs::path target = out_path.empty() ? config.forecast_model : fs::path(out_path);
  if (target.empty()) throw ArgumentError("no output path: pass --out or set forecast_model");
  const Catalog catalog = load_inputs(config, err);
  std::vector<ForecastReport> reports;
  const ForecastModels models = train_forecast_models(catalog.sub_regions, config.pipeline, &reports);
  write_file_atomic(target, to_json(models).dump(1) + "\n");
  err << "seedmix: wrote forecast models to " << target.string() << '\n';
  out << forecast_report_json(reports).dump(1) << '\n';
  return kExitOk;
}

int cmd_train_yield(const PipelineFlags& flags, const std::string& out_path, std::ostream& out,
                    std::ostream& err) {
  RunConfig config = resolve(flags);
  const fs::path target = out_path.empty() ? config.yield_model : fs::path(out_path);
  if (target.empty()) throw ArgumentError("no output path: pass --out or set yield_model");
  const Catalog catalog = load_inputs(config, err);
  YieldReport report;
  const Forest forest = train_yield_model(catalog, config.pipeline, &report);
  write_file_atomic(target, to_json(forest).dump() + "\n");
  err << "seedmix: wrote yield model to " << target.string() << '\n';
  out << yield_report_json(report).dump(1) << '\n';
  return kExitOk;
}

int cmd_build_atlas(const PipelineFlags& flags, const fs::path& out_path, std::ostream& out,
                    std::ostream& err) {
  RunConfig config = resolve(flags);
  const Catalog catalog = load_inputs(config, err);

  ForecastModels models;
  if (!config.forecast_model.empty()) {
    models = forecast_models_from_json(json::parse(read_text_file(config.forecast_model)));
    err << "seedmix: loaded forecast models from " << config.forecast_model.string() << '\n';
  } else {
    err << "seedmix: training forecast models\n";
    models = train_forecast_models(catalog.sub_regions, config.pipeline);
  }
  std::optional<Forest> forest;
  if (!config.yield_model.empty()) {
    forest = forest_from_json(json::parse(read_text_file(config.yield_model)));
    err << "seedmix: loaded yield model from " << config.yield_model.string() << '\n';
  } else {
    err << "seedmix: training yield model\n";
    forest = train_yield_model(catalog, config.pipeline);
  }

  const SolutionAtlas atlas = build_atlas(catalog, models, *forest, config.pipeline);
  write_file_atomic(out_path, serialize_atlas(atlas));
  err << "seedmix: wrote atlas for " << atlas.subregions.size() << " sub-regions ("
      << atlas.summary.solved << " solved) to " << out_path.string() << '\n';
  out << to_json(atlas.summary).dump() << '\n';
  return kExitOk;
}

int cmd_serve(const fs::path& atlas_path, const std::string& bind, const std::string& static_dir,
              std::ostream& err) {
  const auto [host, port] = parse_bind(bind);
  const AtlasService service = AtlasService::load(atlas_path);
  std::optional<fs::path> assets;
  if (!static_dir.empty()) assets = static_dir;
  HttpServer server(service, assets);
  const int bound = server.bind(host, port);
  err << "seedmix: serving " << atlas_path.string() << " on http://" << host << ':' << bound << '\n';
  err.flush();
  server.listen();
  return kExitOk;
}

int cmd_report(const fs::path& atlas_path, const std::string& varieties, bool as_json,
               std::ostream& out, std::ostream& err) {
  const SolutionAtlas atlas = parse_atlas(read_text_file(atlas_path));
  AverageDivisor divisor = AverageDivisor::five;
  if (atlas.config.is_object() && atlas.config.contains("divisor")) {
    divisor = parse_divisor(atlas.config.at("divisor").get<std::string>());
  }

  std::vector<VarietyId> chosen;
  if (!varieties.empty()) {
    std::size_t pos = 0;
    while (pos <= varieties.size()) {
      const auto comma = std::min(varieties.find(',', pos), varieties.size());
      if (comma > pos) chosen.push_back(VarietyId{varieties.substr(pos, comma - pos)});
      pos = comma + 1;
    }
  } else {
    // Most prevalent varieties across the differentiated solutions.
    for (const auto& p : prevalence_ranking(atlas)) {
      if (chosen.size() == kMaxMix || p.expected_weight <= 0.0) break;
      chosen.push_back(p.variety);
    }
  }

  const RegionSummary& s = atlas.summary;
  std::optional<CommonSolution> common;
  if (!chosen.empty()) common = common_solution(atlas, chosen, std::nullopt, divisor);
  if (!common) err << "seedmix: no feasible common mix for the chosen varieties\n";

  if (as_json) {
    json doc{{"target_year", atlas.target_year}, {"summary", to_json(s)}};
    if (common) {
      const auto cmp = compare_solutions(atlas, common->solution, divisor);
      json mix = to_json(common->solution, "");
      mix.erase("sub_region_id");
      const auto perf = [](const MixPerformance& p) {
        return json{{"subregions", p.subregions},
                    {"mean_yield", p.mean_yield},
                    {"yield_variance", p.yield_variance},
                    {"mean_sd", p.mean_sd}};
      };
      doc["common_solution"] = mix;
      doc["comparison"] = {{"differentiated", perf(cmp.differentiated)}, {"common", perf(cmp.common)}};
    }
    out << doc.dump(1) << '\n';
    return kExitOk;
  }

  out << "target_year: " << atlas.target_year << '\n'
      << "subregions: " << s.subregions << '\n'
      << "solved: " << s.solved << '\n'
      << "average_yield: " << format_double(s.average_yield) << '\n'
      << "average_sd: " << format_double(s.average_sd) << '\n'
      << "average_offset_pct: " << format_double(s.average_offset_pct) << '\n';
  if (common) {
    const auto cmp = compare_solutions(atlas, common->solution, divisor);
    out << "common_mix: " << mix_text(common->solution) << '\n'
        << "common_tau: " << format_double(common->solution.tau) << '\n'
        << "compared_subregions: " << cmp.common.subregions << '\n'
        << "differentiated_mean_yield: " << format_double(cmp.differentiated.mean_yield) << '\n'
        << "differentiated_yield_variance: " << format_double(cmp.differentiated.yield_variance) << '\n'
        << "differentiated_mean_sd: " << format_double(cmp.differentiated.mean_sd) << '\n'
        << "common_mean_yield: " << format_double(cmp.common.mean_yield) << '\n'
        << "common_yield_variance: " << format_double(cmp.common.yield_variance) << '\n'
        << "common_mean_sd: " << format_double(cmp.common.mean_sd) << '\n';
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Seed-variety planning pipeline", "seedmix"};
  app.require_subcommand(1);

  GenConfig gen;
  std::string gen_out;
  bool write_config = false;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic region and experiment dataset");
  gen_cmd->add_option("--seed", gen.seed, "Master seed")->capture_default_str();
  gen_cmd->add_option("--subregions", gen.n_subregions, "Number of sub-regions")->capture_default_str();
  gen_cmd->add_option("--varieties", gen.n_varieties, "Number of varieties")->capture_default_str();
  gen_cmd->add_option("--first-year", gen.first_year)->capture_default_str();
  gen_cmd->add_option("--last-year", gen.last_year)->capture_default_str();
  gen_cmd->add_option("--noise", gen.noise_scale, "Noise as a fraction of signal")->capture_default_str();
  gen_cmd->add_option("--experiments-per-pair", gen.experiments_per_pair)->capture_default_str();
  gen_cmd->add_option("--out", gen_out, "Output directory")->required();
  gen_cmd->add_flag("--write-config", write_config, "Also write seedmix.cfg next to the CSVs");

  PipelineFlags forecast_flags;
  std::string forecast_out;
  auto* forecast_cmd = app.add_subcommand("train-forecast", "Train the weather forecast models");
  add_pipeline_flags(forecast_cmd, forecast_flags);
  forecast_cmd->add_option("--out", forecast_out, "Model file (default: forecast_model setting)");

  PipelineFlags yield_flags;
  std::string yield_out;
  auto* yield_cmd = app.add_subcommand("train-yield", "Train the yield distribution forest");
  add_pipeline_flags(yield_cmd, yield_flags);
  yield_cmd->add_option("--out", yield_out, "Model file (default: yield_model setting)");

  PipelineFlags atlas_flags;
  std::string atlas_out;
  auto* atlas_cmd = app.add_subcommand("build-atlas", "Forecast, predict and optimize every sub-region");
  add_pipeline_flags(atlas_cmd, atlas_flags);
  atlas_cmd->add_option("--out", atlas_out, "Atlas file")->required();

  std::string serve_atlas;
  std::string bind = "127.0.0.1:8080";
  std::string static_dir;
  auto* serve_cmd = app.add_subcommand("serve", "Serve an atlas over HTTP");
  serve_cmd->add_option("--atlas", serve_atlas, "Atlas file")->required();
  serve_cmd->add_option("--bind", bind, "host:port")->capture_default_str();
  serve_cmd->add_option("--static", static_dir, "Directory of static UI assets");

  std::string report_atlas;
  std::string report_varieties;
  bool report_json = false;
  auto* report_cmd = app.add_subcommand("report", "Region summary and common vs differentiated comparison");
  report_cmd->add_option("--atlas", report_atlas, "Atlas file")->required();
  report_cmd->add_option("--varieties", report_varieties, "Common mix varieties, comma separated");
  report_cmd->add_flag("--json", report_json, "Emit JSON");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*gen_cmd) return cmd_gen(gen, gen_out, write_config, out, err);
    if (*forecast_cmd) return cmd_train_forecast(forecast_flags, forecast_out, out, err);
    if (*yield_cmd) return cmd_train_yield(yield_flags, yield_out, out, err);
    if (*atlas_cmd) return cmd_build_atlas(atlas_flags, atlas_out, out, err);
    if (*serve_cmd) return cmd_serve(serve_atlas, bind, static_dir, err);
    if (*report_cmd) return cmd_report(report_atlas, report_varieties, report_json, out, err);
  } catch (const ArgumentError& e) {
    err << "seedmix: error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "seedmix: error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace seedmix::cli
