#include "seedmix/config.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "seedmix/dataset_io.hpp"
#include "seedmix/errors.hpp"
#include "seedmix/file_util.hpp"

namespace seedmix {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ArgumentError("setting '" + std::string(key) + "' has invalid value '" +
                        std::string(text) + "'");
  }
  return value;
}

std::string tau_grid_text() {
  std::string out;
  for (double tau : tau_grid()) {
    if (!out.empty()) out += ',';
    out += format_double(tau);
  }
  return out;
}

// The grid is fixed; the setting exists so configs can state it explicitly.
bool is_tau_grid(std::string_view text) {
  std::vector<double> values;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = std::min(text.find(',', pos), text.size());
    values.push_back(parse_number<double>("tau_grid", trim(text.substr(pos, comma - pos))));
    pos = comma + 1;
  }
  const auto& grid = tau_grid();
  if (values.size() != grid.size()) return false;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (std::abs(values[i] - grid[i]) > 1e-9) return false;
  }
  return true;
}

}  // namespace

std::string_view to_string(AverageDivisor divisor) {
  return divisor == AverageDivisor::five ? "five" : "entries";
}

AverageDivisor parse_divisor(std::string_view text) {
  if (text == "five") return AverageDivisor::five;
  if (text == "entries") return AverageDivisor::entry_count;
  throw ArgumentError("divisor must be 'five' or 'entries'");
}

void validate(const PipelineConfig& config) {
  if (config.k < 1 || config.k > kMaxTopK) throw ArgumentError("k must be in 1..10");
  if (config.bins < 2) throw ArgumentError("bins must be >= 2");
  if (!(config.radius_miles >= 0.0)) throw ArgumentError("radius_miles must be >= 0");
  if (config.histogram_bins < 1) throw ArgumentError("histogram_bins must be >= 1");
  validate(config.forecast);
  if (config.forest.n_trees < 1) throw ArgumentError("forest.n_trees must be >= 1");
  if (config.forest.min_leaf < 1) throw ArgumentError("forest.min_leaf must be >= 1");
}

std::map<std::string, std::string> parse_key_values(std::string_view text) {
  std::map<std::string, std::string> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = std::string(trim(line.substr(0, eq)));
    if (key.empty()) throw ParseError("config line " + std::to_string(line_no) + ": empty key");
    if (!out.emplace(key, std::string(trim(line.substr(eq + 1)))).second) {
      throw ParseError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
  }
  return out;
}

void apply_setting(RunConfig& config, std::string_view key, std::string_view value) {
  PipelineConfig& p = config.pipeline;
  if (key == "k") {
    p.k = parse_number<std::size_t>(key, value);
  } else if (key == "bins") {
    p.bins = parse_number<std::size_t>(key, value);
  } else if (key == "radius_miles") {
    p.radius_miles = parse_number<double>(key, value);
  } else if (key == "histogram_bins") {
    p.histogram_bins = parse_number<std::size_t>(key, value);
  } else if (key == "divisor") {
    p.divisor = parse_divisor(value);
  } else if (key == "split_seed") {
    p.split_seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "tau_grid") {
    if (!is_tau_grid(value)) throw ArgumentError("tau_grid is fixed at " + tau_grid_text());
  } else if (key == "forecast.epochs") {
    p.forecast.epochs = parse_number<std::size_t>(key, value);
  } else if (key == "forecast.learning_rate") {
    p.forecast.learning_rate = parse_number<double>(key, value);
  } else if (key == "forecast.hidden_size") {
    p.forecast.hidden_size = parse_number<std::size_t>(key, value);
  } else if (key == "forecast.seed") {
    p.forecast.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "forecast.rule") {
    if (value == "adam") {
      p.forecast.rule = UpdateRule::adam;
    } else if (value == "gd") {
      p.forecast.rule = UpdateRule::gradient_descent;
    } else {
      throw ArgumentError("forecast.rule must be 'adam' or 'gd'");
    }
  } else if (key == "forest.n_trees") {
    p.forest.n_trees = parse_number<std::size_t>(key, value);
  } else if (key == "forest.min_leaf") {
    p.forest.min_leaf = parse_number<std::size_t>(key, value);
  } else if (key == "forest.max_features") {
    p.forest.max_features = parse_number<std::size_t>(key, value);
  } else if (key == "forest.seed") {
    p.forest.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "target_year") {
    if (value.empty() || value == "auto") {
      p.target_year.reset();
    } else {
      p.target_year = parse_number<int>(key, value);
    }
  } else if (key == "threads") {
    p.threads = parse_number<std::size_t>(key, value);
    p.forest.threads = p.threads;
  } else if (key == "region_csv") {
    config.region_csv = std::string(value);
  } else if (key == "experiments_csv") {
    config.experiments_csv = std::string(value);
  } else if (key == "forecast_model") {
    config.forecast_model = std::string(value);
  } else if (key == "yield_model") {
    config.yield_model = std::string(value);
  } else {
    throw ArgumentError("unknown setting '" + std::string(key) + "'");
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  RunConfig config;
  for (const auto& [key, value] : parse_key_values(read_text_file(path))) {
    apply_setting(config, key, value);
  }
  const auto base = path.parent_path();
  for (auto* p : {&config.region_csv, &config.experiments_csv, &config.forecast_model,
                  &config.yield_model}) {
    if (!p->empty() && p->is_relative()) *p = base / *p;
  }
  validate(config.pipeline);
  return config;
}

std::string render_run_config(const RunConfig& config) {
  const PipelineConfig& p = config.pipeline;
  std::ostringstream out;
  out << "# seedmix pipeline configuration\n"
      << "region_csv = " << config.region_csv.string() << '\n'
      << "experiments_csv = " << config.experiments_csv.string() << '\n'
      << "forecast_model = " << config.forecast_model.string() << '\n'
      << "yield_model = " << config.yield_model.string() << '\n'
      << "k = " << p.k << '\n'
      << "bins = " << p.bins << '\n'
      << "radius_miles = " << format_double(p.radius_miles) << '\n'
      << "tau_grid = " << tau_grid_text() << '\n'
      << "histogram_bins = " << p.histogram_bins << '\n'
      << "divisor = " << to_string(p.divisor) << '\n'
      << "split_seed = " << p.split_seed << '\n'
      << "forecast.epochs = " << p.forecast.epochs << '\n'
      << "forecast.learning_rate = " << format_double(p.forecast.learning_rate) << '\n'
      << "forecast.hidden_size = " << p.forecast.hidden_size << '\n'
      << "forecast.seed = " << p.forecast.seed << '\n'
      << "forecast.rule = " << (p.forecast.rule == UpdateRule::adam ? "adam" : "gd") << '\n'
      << "forest.n_trees = " << p.forest.n_trees << '\n'
      << "forest.min_leaf = " << p.forest.min_leaf << '\n'
      << "forest.max_features = " << p.forest.max_features << '\n'
      << "forest.seed = " << p.forest.seed << '\n'
      << "target_year = " << (p.target_year ? std::to_string(*p.target_year) : "auto") << '\n'
      << "threads = " << p.threads << '\n';
  return out.str();
}

nlohmann::json snapshot(const PipelineConfig& p) {
  return nlohmann::json{
      {"k", p.k},
      {"bins", p.bins},
      {"radius_miles", p.radius_miles},
      {"tau_grid", tau_grid()},
      {"histogram_bins", p.histogram_bins},
      {"divisor", std::string(to_string(p.divisor))},
      {"split_seed", p.split_seed},
      {"forecast",
       {{"epochs", p.forecast.epochs},
        {"learning_rate", p.forecast.learning_rate},
        {"hidden_size", p.forecast.hidden_size},
        {"seed", p.forecast.seed},
        {"rule", p.forecast.rule == UpdateRule::adam ? "adam" : "gd"}}},
      {"forest",
       {{"n_trees", p.forest.n_trees},
        {"min_leaf", p.forest.min_leaf},
        {"max_features", p.forest.max_features},
        {"seed", p.forest.seed}}},
  };
}

}  // namespace seedmix
