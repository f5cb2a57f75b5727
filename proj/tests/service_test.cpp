#include <gtest/gtest.h>

#include <thread>

#include <httplib.h>

#include "oracles.hpp"
#include "seedmix/datagen.hpp"
#include "seedmix/errors.hpp"
#include "seedmix/file_util.hpp"
#include "seedmix/service.hpp"

namespace seedmix {
namespace {

using json = nlohmann::json;
using testing::stub_atlas;

VarietyId v(const char* code) { return VarietyId{code}; }

const AtlasService& generated() {
  static const AtlasService service = [] {
    GenConfig g;
    g.n_subregions = 12;
    g.n_varieties = 8;
    const Catalog catalog = generate(g).catalog;
    PipelineConfig c;
    c.forecast.epochs = 30;
    c.forest.n_trees = 20;
    const auto models = train_forecast_models(catalog.sub_regions, c);
    const auto forest = train_yield_model(catalog, c);
    return AtlasService(build_atlas(catalog, models, forest, c));
  }();
  return service;
}

// Two close sub-regions and one far away; B is high-yield but volatile.
const AtlasService& stub() {
  static const AtlasService service(stub_atlas(
      {{"S1", 40.0, -90.0, {{v("A"), {40.0, 4.0}}, {v("B"), {60.0, 40.0}}, {v("C"), {45.0, 10.0}}}},
       {"S2", 40.2, -90.2, {{v("A"), {42.0, 5.0}}, {v("B"), {58.0, 36.0}}, {v("C"), {44.0, 9.0}}}},
       {"S3", 47.0, -70.0, {{v("A"), {30.0, 2.0}}, {v("C"), {50.0, 3.0}}}}}));
  return service;
}

ApiResponse get(const AtlasService& s, std::string path, std::map<std::string, std::string> query = {}) {
  return s.handle(ApiRequest{"GET", std::move(path), std::move(query), ""});
}

ApiResponse post(const AtlasService& s, std::string path, std::string body) {
  return s.handle(ApiRequest{"POST", std::move(path), {}, std::move(body)});
}

void expect_problem(const ApiResponse& r, int status) {
  EXPECT_EQ(r.status, status) << r.text();
  EXPECT_EQ(r.body.at("status"), status);
  EXPECT_TRUE(r.body.at("code").is_string());
  EXPECT_TRUE(r.body.at("message").is_string());
}

TEST(Bind, Parses) {
  EXPECT_EQ(parse_bind("127.0.0.1:8080"), (std::pair<std::string, int>{"127.0.0.1", 8080}));
  EXPECT_EQ(parse_bind("localhost:0").second, 0);
  EXPECT_THROW(parse_bind("8080"), ArgumentError);
  EXPECT_THROW(parse_bind(":80"), ArgumentError);
  EXPECT_THROW(parse_bind("h:99999"), ArgumentError);
  EXPECT_THROW(parse_bind("h:x"), ArgumentError);
}

TEST(Routing, UnknownAndWrongMethod) {
  expect_problem(get(stub(), "/api/nothing"), 404);
  expect_problem(get(stub(), "/"), 404);
  expect_problem(get(stub(), "/api/subregions/S1/topk/extra"), 404);
  expect_problem(post(stub(), "/api/subregions", "{}"), 405);
  expect_problem(get(stub(), "/api/solutions/common"), 405);
  expect_problem(stub().handle(ApiRequest{"DELETE", "/api/summary", {}, ""}), 405);
}

TEST(Subregions, ListsEverySubRegion) {
  const auto r = get(stub(), "/api/subregions");
  ASSERT_EQ(r.status, 200);
  ASSERT_EQ(r.body.size(), 3u);
  EXPECT_EQ(r.body[0].at("id"), "S1");
  EXPECT_EQ(r.body[0].at("neighbor_count"), 1);
  EXPECT_EQ(r.body[2].at("neighbor_count"), 0);
  EXPECT_EQ(r.body[0].at("default_solution").at("sub_region_id"), "S1");
  EXPECT_TRUE(r.body[0].contains("sc"));
}

TEST(TopK, DefaultAndPerTau) {
  const auto r = get(stub(), "/api/subregions/S1/topk");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body.at("sub_region_id"), "S1");
  EXPECT_EQ(r.body.at("k"), 3);
  EXPECT_EQ(r.body.at("bins").at("r"), 20);
  const auto& entries = r.body.at("entries");
  ASSERT_EQ(entries.size(), 3u);
  for (std::size_t i = 1; i < entries.size(); ++i) {
    EXPECT_GE(entries[i - 1].at("score").get<double>(), entries[i].at("score").get<double>());
  }
  double total = 0.0;
  for (const auto& e : entries) total += e.at("weight").get<double>();
  EXPECT_NEAR(total, 1.0, 1e-9);

  const auto low = get(stub(), "/api/subregions/S1/topk", {{"tau", "0.1"}});
  ASSERT_EQ(low.status, 200);
  EXPECT_EQ(low.body.at("solution").at("tau"), 0.1);
  expect_problem(get(stub(), "/api/subregions/S1/topk", {{"tau", "0.15"}}), 400);
  expect_problem(get(stub(), "/api/subregions/S1/topk", {{"tau", "abc"}}), 400);
  expect_problem(get(stub(), "/api/subregions/NOPE/topk"), 404);
}

TEST(TopK, CountsAcrossSubRegions) {
  const auto r = get(stub(), "/api/subregions/S3/topk");
  for (const auto& e : r.body.at("entries")) {
    EXPECT_EQ(e.at("count"), e.at("variety_id") == "A" || e.at("variety_id") == "C" ? 3 : 2);
  }
}

TEST(Differentiated, TauOneEverySubRegionFeasible) {
  const auto r = get(stub(), "/api/solutions/differentiated", {{"tau", "1.0"}});
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body.at("tau"), 1.0);
  for (const auto& item : r.body.at("subregions")) EXPECT_TRUE(item.at("feasible").get<bool>());
  EXPECT_EQ(r.body.at("summary").at("solved"), 3);
  expect_problem(get(stub(), "/api/solutions/differentiated"), 400);
  expect_problem(get(stub(), "/api/solutions/differentiated", {{"tau", "0"}}), 400);
  expect_problem(get(stub(), "/api/solutions/differentiated", {{"tau", "1.1"}}), 400);
}

TEST(Differentiated, LowTauMatchesSweep) {
  const auto r = get(stub(), "/api/solutions/differentiated", {{"tau", "0.1"}});
  ASSERT_EQ(r.status, 200);
  for (const auto& item : r.body.at("subregions")) {
    const auto* sub = stub().atlas().find(item.at("sub_region_id").get<std::string>());
    ASSERT_NE(sub, nullptr);
    EXPECT_EQ(item.at("feasible").get<bool>(), sub->solution_at(0) != nullptr);
    if (sub->solution_at(0)) {
      EXPECT_EQ(item.at("solution").at("expected_yield").get<double>(), sub->solution_at(0)->expected_yield);
    }
  }
}

TEST(Common, SolvesAndCompares) {
  const auto r = post(stub(), "/api/solutions/common", R"({"varieties": ["A", "C"]})");
  ASSERT_EQ(r.status, 200) << r.text();
  EXPECT_FALSE(r.body.at("solution").contains("sub_region_id"));
  double total = 0.0;
  for (const auto& e : r.body.at("solution").at("entries")) total += e.at("weight").get<double>();
  EXPECT_NEAR(total, 1.0, 1e-9);
  EXPECT_EQ(r.body.at("comparison").at("common").at("subregions"), 3);
  EXPECT_GT(r.body.at("region_yield").get<double>(), 0.0);
  EXPECT_EQ(r.text(), post(stub(), "/api/solutions/common", R"({"varieties": ["A", "C"]})").text());
}

TEST(Common, VolatileOnlyMixAtLowTauIsInfeasible) {
  // Region-level norm_var of B is 1, so weight 1 of B cannot fit under 0.1.
  const auto r = post(stub(), "/api/solutions/common", R"({"varieties": ["B"], "tau": 0.1})");
  expect_problem(r, 422);
  EXPECT_EQ(r.body.at("code"), "infeasible");
}

TEST(Common, BadRequests) {
  expect_problem(post(stub(), "/api/solutions/common", "not json"), 400);
  expect_problem(post(stub(), "/api/solutions/common", "{}"), 400);
  expect_problem(post(stub(), "/api/solutions/common", R"({"varieties": [1]})"), 400);
  expect_problem(post(stub(), "/api/solutions/common", R"({"varieties": []})"), 400);
  expect_problem(post(stub(), "/api/solutions/common", R"({"varieties": ["A","A"]})"), 400);
  expect_problem(post(stub(), "/api/solutions/common", R"({"varieties": ["A"], "tau": 0.33})"), 400);
  const auto unknown = post(stub(), "/api/solutions/common", R"({"varieties": ["Q"]})");
  expect_problem(unknown, 400);
  EXPECT_EQ(unknown.body.at("code"), "unknown_variety");
}

TEST(Varieties, RankingAndMembers) {
  const auto r = get(stub(), "/api/varieties");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body.at("histogram_bins"), 10);
  EXPECT_TRUE(r.body.at("tau").is_null());
  const auto& list = r.body.at("varieties");
  ASSERT_EQ(list.size(), 3u);
  double sum = 0.0;
  for (const auto& item : list) sum += item.at("expected_weight").get<double>();
  EXPECT_NEAR(sum, 1.0, 1e-9);
  EXPECT_EQ(get(stub(), "/api/varieties", {{"tau", "0.5"}}).body.at("tau"), 0.5);
  expect_problem(get(stub(), "/api/varieties", {{"tau", "2"}}), 400);

  const auto members = get(stub(), "/api/varieties/B/topk-members");
  ASSERT_EQ(members.status, 200);
  EXPECT_EQ(members.body.at("sub_region_ids"), json({"S1", "S2"}));
  expect_problem(get(stub(), "/api/varieties/Q/topk-members"), 404);
}

TEST(Highlight, Query) {
  const auto all = get(stub(), "/api/highlight", {{"varieties", "A,B,C"}});
  ASSERT_EQ(all.status, 200);
  EXPECT_EQ(all.body.at("sub_region_ids").size(), 3u);
  EXPECT_TRUE(get(stub(), "/api/highlight").body.at("sub_region_ids").empty());
  const auto full = get(stub(), "/api/highlight", {{"varieties", "A,B,C"}, {"lo", "0"}, {"hi", "1"}});
  EXPECT_EQ(full.body, all.body);
  expect_problem(get(stub(), "/api/highlight", {{"varieties", "Q"}}), 400);
  expect_problem(get(stub(), "/api/highlight", {{"varieties", "A"}, {"lo", "0.8"}, {"hi", "0.2"}}), 400);
}

TEST(Summary, MatchesAtlas) {
  const auto r = get(stub(), "/api/summary");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body.at("target_year"), 2016);
  EXPECT_EQ(r.body.at("by_tau").size(), kTauSteps);
  EXPECT_EQ(r.body.at("summary").at("average_yield").get<double>(), stub().atlas().summary.average_yield);
}

TEST(Attributes, ListAndValues) {
  const auto& s = generated();
  const auto list = get(s, "/api/attributes");
  ASSERT_EQ(list.status, 200);
  EXPECT_EQ(list.body.at("weather").size(), kWeatherCount);
  EXPECT_EQ(list.body.at("first_year"), 2000);
  EXPECT_EQ(list.body.at("last_year"), 2015);
  EXPECT_EQ(list.body.at("forecast_year"), 2016);

  const auto hist = get(s, "/api/attributes/temperature", {{"year", "2005"}});
  ASSERT_EQ(hist.status, 200);
  EXPECT_FALSE(hist.body.at("forecast").get<bool>());
  const auto& first = s.atlas().subregions[0];
  EXPECT_EQ(hist.body.at("values").at(first.id).get<double>(), first.weather_history[0].at(2005));

  const auto fc = get(s, "/api/attributes/precipitation", {{"year", "2016"}});
  ASSERT_EQ(fc.status, 200);
  EXPECT_TRUE(fc.body.at("forecast").get<bool>());
  EXPECT_EQ(fc.body.at("values").at(first.id).get<double>(), first.forecast[1]);

  const auto soil = get(s, "/api/attributes/soil_ph");
  ASSERT_EQ(soil.status, 200);
  EXPECT_EQ(soil.body.at("values").size(), s.atlas().subregions.size());

  expect_problem(get(s, "/api/attributes/temperature"), 400);
  expect_problem(get(s, "/api/attributes/temperature", {{"year", "1990"}}), 404);
  expect_problem(get(s, "/api/attributes/temperature", {{"year", "x"}}), 400);
  expect_problem(get(s, "/api/attributes/humidity", {{"year", "2005"}}), 404);
}

TEST(Load, RejectsTamperedAtlas) {
  testing::TempDir dir;
  auto doc = to_json(stub().atlas());
  write_file_atomic(dir / "ok.json", doc.dump());
  EXPECT_NO_THROW(AtlasService::load(dir / "ok.json"));
  doc["summary"]["average_yield"] = 1.0;
  write_file_atomic(dir / "bad.json", doc.dump());
  EXPECT_THROW(AtlasService::load(dir / "bad.json"), IntegrityError);
  EXPECT_THROW(AtlasService::load(dir / "missing.json"), IoError);
}

TEST(Http, ServesOverSocket) {
  const AtlasService& s = stub();
  HttpServer server(s);
  const int port = server.bind("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  std::thread loop([&] { server.listen(); });
  httplib::Client client("127.0.0.1", port);
  client.set_connection_timeout(5);

  const auto list = client.Get("/api/subregions");
  ASSERT_TRUE(list);
  EXPECT_EQ(list->status, 200);
  EXPECT_EQ(json::parse(list->body), get(s, "/api/subregions").body);

  const auto common = client.Post("/api/solutions/common", R"({"varieties":["A","C"]})", "application/json");
  ASSERT_TRUE(common);
  EXPECT_EQ(common->status, 200);
  EXPECT_EQ(common->body, post(s, "/api/solutions/common", R"({"varieties":["A","C"]})").text());

  const auto bad = client.Get("/api/subregions/NOPE/topk");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 404);
  EXPECT_EQ(bad->get_header_value("Content-Type"), "application/problem+json");

  const auto del = client.Delete("/api/summary");
  ASSERT_TRUE(del);
  EXPECT_EQ(del->status, 405);

  const auto tau = client.Get("/api/solutions/differentiated?tau=0.3");
  ASSERT_TRUE(tau);
  EXPECT_EQ(json::parse(tau->body).at("tau"), 0.3);

  server.stop();
  loop.join();
}

}  // namespace
}  // namespace seedmix
