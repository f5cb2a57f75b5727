#include "seedmix/service.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include <httplib.h>

#include "seedmix/config.hpp"
#include "seedmix/errors.hpp"
#include "seedmix/file_util.hpp"
#include "seedmix/pipeline.hpp"

namespace seedmix {
namespace {

using json = nlohmann::json;

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (pos < path.size()) {
    const std::size_t next = path.find('/', pos);
    const std::size_t end = next == std::string_view::npos ? path.size() : next;
    if (end > pos) parts.emplace_back(path.substr(pos, end - pos));
    pos = end + 1;
  }
  return parts;
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t next = text.find(',', pos);
    const std::size_t end = next == std::string_view::npos ? text.size() : next;
    if (end > pos) out.emplace_back(text.substr(pos, end - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

std::optional<double> parse_double(std::string_view text) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::optional<int> parse_int(std::string_view text) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

const std::string* query_value(const ApiRequest& request, const std::string& key) {
  const auto it = request.query.find(key);
  return it == request.query.end() ? nullptr : &it->second;
}

// Optional ?tau= as a grid index. Sets `error` when present but off-grid.
std::optional<std::size_t> tau_param(const ApiRequest& request, std::optional<ApiResponse>& error) {
  const std::string* raw = query_value(request, "tau");
  if (!raw) return std::nullopt;
  const auto value = parse_double(*raw);
  const auto idx = value ? tau_index(*value) : std::nullopt;
  if (!idx) error = problem(400, "bad_request", "tau must be one of 0.1, 0.2, ..., 1.0");
  return idx;
}

ApiResponse ok(json body) { return ApiResponse{200, std::move(body)}; }

}  // namespace

std::pair<std::string, int> parse_bind(std::string_view bind) {
  const std::size_t colon = bind.rfind(':');
  if (colon == std::string_view::npos || colon == 0) {
    throw ArgumentError("bind address must be host:port");
  }
  const auto port = parse_int(bind.substr(colon + 1));
  if (!port || *port < 0 || *port > 65535) throw ArgumentError("invalid port in bind address");
  return {std::string(bind.substr(0, colon)), *port};
}

ApiResponse problem(int status, std::string_view code, std::string_view message) {
  return ApiResponse{status, json{{"status", status}, {"code", code}, {"message", message}}};
}

AtlasService::AtlasService(SolutionAtlas atlas) : atlas_(std::move(atlas)) {
  divisor_ = AverageDivisor::five;
  histogram_bins_ = 10;
  if (atlas_.config.is_object()) {
    if (atlas_.config.contains("divisor")) {
      divisor_ = parse_divisor(atlas_.config.at("divisor").get<std::string>());
    }
    if (atlas_.config.contains("histogram_bins")) {
      histogram_bins_ = atlas_.config.at("histogram_bins").get<std::size_t>();
    }
  }
  topk_counts_ = topk_counts(atlas_);
  bool first = true;
  for (const auto& r : atlas_.subregions) {
    for (const auto& series : r.weather_history) {
      if (series.empty()) continue;
      const int lo = series.begin()->first;
      const int hi = series.rbegin()->first;
      first_year_ = first ? lo : std::min(first_year_, lo);
      last_year_ = first ? hi : std::max(last_year_, hi);
      first = false;
    }
  }
}

AtlasService AtlasService::load(const std::filesystem::path& path) {
  SolutionAtlas atlas = parse_atlas(read_text_file(path));
  const auto problems = audit_atlas(atlas);
  if (!problems.empty()) throw IntegrityError("atlas failed validation: " + problems.front());
  return AtlasService(std::move(atlas));
}

ApiResponse AtlasService::handle(const ApiRequest& request) const {
  const auto parts = split_path(request.path);
  if (parts.empty() || parts[0] != "api") return problem(404, "not_found", "no such resource");
  const bool get = request.method == "GET";
  const bool post = request.method == "POST";
  const auto method_mismatch = [&] { return problem(405, "method_not_allowed", "method not allowed"); };

  try {
    if (parts.size() == 2 && parts[1] == "subregions") return get ? subregions() : method_mismatch();
    if (parts.size() == 4 && parts[1] == "subregions" && parts[3] == "topk") {
      return get ? topk(parts[2], request) : method_mismatch();
    }
    if (parts.size() == 2 && parts[1] == "attributes") return get ? attributes() : method_mismatch();
    if (parts.size() == 3 && parts[1] == "attributes") {
      return get ? attribute(parts[2], request) : method_mismatch();
    }
    if (parts.size() == 3 && parts[1] == "solutions" && parts[2] == "common") {
      return post ? common(request) : method_mismatch();
    }
    if (parts.size() == 3 && parts[1] == "solutions" && parts[2] == "differentiated") {
      return get ? differentiated(request) : method_mismatch();
    }
    if (parts.size() == 2 && parts[1] == "varieties") return get ? varieties(request) : method_mismatch();
    if (parts.size() == 4 && parts[1] == "varieties" && parts[3] == "topk-members") {
      return get ? variety_members(parts[2]) : method_mismatch();
    }
    if (parts.size() == 2 && parts[1] == "highlight") return get ? highlight(request) : method_mismatch();
    if (parts.size() == 2 && parts[1] == "summary") return get ? summary() : method_mismatch();
  } catch (const Error& e) {
    return problem(500, e.code(), e.what());
  }
  return problem(404, "not_found", "no such resource");
}

ApiResponse AtlasService::subregions() const {
  json list = json::array();
  for (const auto& r : atlas_.subregions) {
    json item{{"id", r.id}, {"lat", r.lat}, {"lon", r.lon}, {"neighbor_count", r.neighbor_count}};
    if (r.default_solution) item["default_solution"] = to_json(*r.default_solution, r.id);
    if (r.sc_default) item["sc"] = *r.sc_default;
    list.push_back(std::move(item));
  }
  return ok(std::move(list));
}

ApiResponse AtlasService::topk(const std::string& id, const ApiRequest& request) const {
  const SubRegionResult* r = atlas_.find(id);
  if (!r) return problem(404, "not_found", "unknown sub-region " + id);
  std::optional<ApiResponse> error;
  const auto idx = tau_param(request, error);
  if (error) return *error;
  const PortfolioSolution* solution =
      idx ? r->solution_at(*idx) : (r->default_solution ? &*r->default_solution : nullptr);

  json entries = json::array();
  for (const auto& t : r->topk) {
    const auto count = topk_counts_.find(t.stats.variety);
    entries.push_back(json{{"variety_id", t.stats.variety.code},
                           {"score", t.score},
                           {"e", t.stats.e},
                           {"var", t.stats.var},
                           {"norm_e", t.stats.norm_e},
                           {"norm_var", t.stats.norm_var},
                           {"weight", solution ? solution->weight_of(t.stats.variety).value_or(0.0) : 0.0},
                           {"count", count == topk_counts_.end() ? 0 : count->second},
                           {"distribution", t.distribution}});
  }
  json body{{"sub_region_id", r->id},
            {"k", r->topk.size()},
            {"bins", {{"lo", atlas_.scheme.lo}, {"hi", atlas_.scheme.hi}, {"r", atlas_.scheme.r}}},
            {"entries", std::move(entries)}};
  body["solution"] = solution ? to_json(*solution, r->id) : json(nullptr);
  return ok(std::move(body));
}

ApiResponse AtlasService::attributes() const {
  json weather = json::array();
  for (auto name : kWeatherAttributes) weather.push_back(name);
  json soil = json::array();
  for (auto name : kSoilAttributes) soil.push_back(name);
  return ok(json{{"weather", weather},
                 {"soil", soil},
                 {"first_year", first_year_},
                 {"last_year", last_year_},
                 {"forecast_year", atlas_.target_year}});
}

ApiResponse AtlasService::attribute(const std::string& name, const ApiRequest& request) const {
  std::optional<std::size_t> weather_idx;
  std::optional<std::size_t> soil_idx;
  for (std::size_t a = 0; a < kWeatherCount; ++a) {
    if (kWeatherAttributes[a] == name) weather_idx = a;
  }
  for (std::size_t s = 0; s < kSoilCount; ++s) {
    if (kSoilAttributes[s] == name) soil_idx = s;
  }
  if (!weather_idx && !soil_idx) return problem(404, "not_found", "unknown attribute " + name);

  std::optional<int> year;
  if (const std::string* raw = query_value(request, "year")) {
    year = parse_int(*raw);
    if (!year) return problem(400, "bad_request", "year must be an integer");
  }
  const bool in_history = year && *year >= first_year_ && *year <= last_year_;
  const bool is_forecast = year && *year == atlas_.target_year && !in_history;
  if (weather_idx && !year) return problem(400, "bad_request", "year is required for weather attributes");
  if (year && !in_history && !is_forecast) {
    return problem(404, "not_found", "year " + std::to_string(*year) + " is out of range");
  }

  json values = json::object();
  for (const auto& r : atlas_.subregions) {
    if (soil_idx) {
      values[r.id] = r.soil[*soil_idx];
    } else if (is_forecast) {
      values[r.id] = r.forecast[*weather_idx];
    } else {
      const auto& series = r.weather_history[*weather_idx];
      const auto it = series.find(*year);
      if (it != series.end()) values[r.id] = it->second;
    }
  }
  json body{{"attribute", name}, {"forecast", is_forecast}, {"values", std::move(values)}};
  body["year"] = year ? json(*year) : json(nullptr);
  return ok(std::move(body));
}

ApiResponse AtlasService::common(const ApiRequest& request) const {
  json doc;
  try {
    doc = json::parse(request.body);
  } catch (const json::parse_error&) {
    return problem(400, "bad_request", "body must be JSON");
  }
  if (!doc.is_object() || !doc.contains("varieties") || !doc.at("varieties").is_array()) {
    return problem(400, "bad_request", "body must contain a 'varieties' array");
  }
  std::vector<VarietyId> chosen;
  for (const auto& v : doc.at("varieties")) {
    if (!v.is_string()) return problem(400, "bad_request", "variety ids must be strings");
    chosen.push_back(VarietyId{v.get<std::string>()});
  }
  std::optional<double> tau;
  if (doc.contains("tau") && !doc.at("tau").is_null()) {
    if (!doc.at("tau").is_number() || !tau_index(doc.at("tau").get<double>())) {
      return problem(400, "bad_request", "tau must be one of 0.1, 0.2, ..., 1.0");
    }
    tau = tau_grid()[*tau_index(doc.at("tau").get<double>())];
  }

  std::optional<CommonSolution> result;
  try {
    result = common_solution(atlas_, chosen, tau, divisor_);
  } catch (const ArgumentError& e) {
    return problem(400, "bad_request", e.what());
  } catch (const KeyError& e) {
    return problem(400, "unknown_variety", e.what());
  }
  if (!result) return problem(422, "infeasible", "no feasible mix for the selected varieties");

  json solution = to_json(result->solution, "");
  solution.erase("sub_region_id");
  const auto comparison = compare_solutions(atlas_, result->solution, divisor_);
  const auto perf = [](const MixPerformance& p) {
    return json{{"subregions", p.subregions},
                {"mean_yield", p.mean_yield},
                {"yield_variance", p.yield_variance},
                {"mean_sd", p.mean_sd}};
  };
  return ok(json{{"solution", std::move(solution)},
                 {"region_yield", result->region_yield},
                 {"mean_subregion_sd", result->mean_subregion_sd},
                 {"comparison",
                  {{"differentiated", perf(comparison.differentiated)},
                   {"common", perf(comparison.common)}}}});
}

ApiResponse AtlasService::differentiated(const ApiRequest& request) const {
  if (!query_value(request, "tau")) return problem(400, "bad_request", "tau is required");
  std::optional<ApiResponse> error;
  const auto idx = tau_param(request, error);
  if (error) return *error;

  json list = json::array();
  for (const auto& r : atlas_.subregions) {
    const PortfolioSolution* s = r.solution_at(*idx);
    json item{{"sub_region_id", r.id}, {"feasible", s != nullptr}};
    item["solution"] = s ? to_json(*s, r.id) : json(nullptr);
    const auto& sc = *idx < r.sc.size() ? r.sc[*idx] : std::optional<double>{};
    item["sc"] = sc ? json(*sc) : json(nullptr);
    list.push_back(std::move(item));
  }
  return ok(json{{"tau", tau_grid()[*idx]},
                 {"summary", to_json(atlas_.summary_at(*idx))},
                 {"subregions", std::move(list)}});
}

ApiResponse AtlasService::varieties(const ApiRequest& request) const {
  std::optional<ApiResponse> error;
  const auto idx = tau_param(request, error);
  if (error) return *error;
  const auto ranking = prevalence_ranking(atlas_, idx, histogram_bins_);
  json list = json::array();
  for (const auto& p : ranking) {
    const auto count = topk_counts_.find(p.variety);
    list.push_back(json{{"variety_id", p.variety.code},
                        {"expected_weight", p.expected_weight},
                        {"present", p.present},
                        {"histogram", p.histogram},
                        {"topk_count", count == topk_counts_.end() ? 0 : count->second}});
  }
  json body{{"histogram_bins", histogram_bins_}, {"varieties", std::move(list)}};
  body["tau"] = idx ? json(tau_grid()[*idx]) : json(nullptr);
  return ok(std::move(body));
}

ApiResponse AtlasService::variety_members(const std::string& code) const {
  const VarietyId variety{code};
  if (!std::binary_search(atlas_.varieties.begin(), atlas_.varieties.end(), variety)) {
    return problem(404, "not_found", "unknown variety " + code);
  }
  return ok(json{{"variety_id", code}, {"sub_region_ids", topk_members(atlas_, variety)}});
}

ApiResponse AtlasService::highlight(const ApiRequest& request) const {
  std::set<VarietyId> chosen;
  if (const std::string* raw = query_value(request, "varieties")) {
    for (auto& code : split_list(*raw)) {
      VarietyId v{std::move(code)};
      if (!std::binary_search(atlas_.varieties.begin(), atlas_.varieties.end(), v)) {
        return problem(400, "unknown_variety", "unknown variety " + v.code);
      }
      chosen.insert(std::move(v));
    }
  }
  const std::string* lo_raw = query_value(request, "lo");
  const std::string* hi_raw = query_value(request, "hi");
  std::optional<std::pair<double, double>> range;
  if (lo_raw || hi_raw) {
    const auto lo = lo_raw ? parse_double(*lo_raw) : std::optional<double>(0.0);
    const auto hi = hi_raw ? parse_double(*hi_raw) : std::optional<double>(1.0);
    if (!lo || !hi || *lo > *hi) return problem(400, "bad_request", "lo/hi must be numbers with lo <= hi");
    range.emplace(*lo, *hi);
  }
  std::optional<ApiResponse> error;
  const auto idx = tau_param(request, error);
  if (error) return *error;
  return ok(json{{"sub_region_ids", highlight_subregions(atlas_, chosen, range, idx)}});
}

ApiResponse AtlasService::summary() const {
  json per_tau = json::array();
  for (std::size_t t = 0; t < tau_grid().size(); ++t) {
    json s = to_json(atlas_.summary_at(t));
    s["tau"] = tau_grid()[t];
    per_tau.push_back(std::move(s));
  }
  return ok(json{{"target_year", atlas_.target_year},
                 {"summary", to_json(atlas_.summary)},
                 {"by_tau", std::move(per_tau)},
                 {"config", atlas_.config}});
}

struct HttpServer::Impl {
  const AtlasService& service;
  httplib::Server server;

  explicit Impl(const AtlasService& s) : service(s) {}
};

HttpServer::HttpServer(const AtlasService& service, std::optional<std::filesystem::path> static_dir)
    : impl_(std::make_unique<Impl>(service)) {
  const auto route = [this](const httplib::Request& req, httplib::Response& res) {
    ApiRequest request;
    request.method = req.method;
    request.path = req.path;
    for (const auto& [key, value] : req.params) request.query.emplace(key, value);
    request.body = req.body;
    const ApiResponse response = impl_->service.handle(request);
    res.status = response.status;
    res.set_content(response.text(), response.status >= 400 ? "application/problem+json" : "application/json");
  };
  impl_->server.Get(R"(/api/.*)", route);
  impl_->server.Post(R"(/api/.*)", route);
  impl_->server.Put(R"(/api/.*)", route);
  impl_->server.Delete(R"(/api/.*)", route);
  impl_->server.Patch(R"(/api/.*)", route);
  if (static_dir) {
    if (!impl_->server.set_mount_point("/", static_dir->string())) {
      throw IoError("static directory not found: " + static_dir->string());
    }
  }
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw IoError("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw IoError("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace seedmix
