#include <gtest/gtest.h>

#include "oracles.hpp"
#include "seedmix/atlas.hpp"
#include "seedmix/errors.hpp"

namespace seedmix {
namespace {

using testing::stub_atlas;

VarietyId v(const char* code) { return VarietyId{code}; }

SolutionAtlas sample() {
  return stub_atlas({{"N2", 40.0, -90.0, {{v("A"), {40.0, 9.0}}, {v("B"), {55.0, 30.0}}, {v("C"), {48.0, 2.0}}}},
                     {"N1", 40.3, -90.1, {{v("A"), {42.0, 5.0}}, {v("B"), {51.0, 25.0}}}},
                     {"N3", 45.0, -80.0, {{v("C"), {33.3333333333, 1.0 / 3.0}}}}});
}

TEST(Atlas, SortedAndFindable) {
  const auto a = sample();
  ASSERT_EQ(a.subregions.size(), 3u);
  EXPECT_EQ(a.subregions[0].id, "N1");
  EXPECT_EQ(a.varieties, (std::vector<VarietyId>{v("A"), v("B"), v("C")}));
  ASSERT_NE(a.find("N3"), nullptr);
  EXPECT_EQ(a.find("N3")->id, "N3");
  EXPECT_EQ(a.find("N0"), nullptr);
  EXPECT_EQ(a.find("N4"), nullptr);
  EXPECT_EQ(a.subregions[0].neighbor_count, 1u);
  EXPECT_EQ(a.subregions[2].neighbor_count, 0u);
}

TEST(Atlas, SerializeRoundTripIsExact) {
  const auto a = sample();
  const std::string text = serialize_atlas(a);
  const SolutionAtlas back = parse_atlas(text);
  EXPECT_EQ(serialize_atlas(back), text);
  EXPECT_EQ(back.summary.average_yield, a.summary.average_yield);
  EXPECT_EQ(back.subregions[2].stats[0].e, a.subregions[2].stats[0].e);
  EXPECT_EQ(back.subregions[2].stats[0].var, 1.0 / 3.0);
  EXPECT_TRUE(audit_atlas(back).empty());
}

TEST(Atlas, SummaryAtMatchesSweep) {
  const auto a = sample();
  for (std::size_t t = 0; t < kTauSteps; ++t) {
    std::vector<const PortfolioSolution*> s;
    for (const auto& r : a.subregions) s.push_back(r.solution_at(t));
    const RegionSummary expect = summarize(s, a.subregions.size());
    const RegionSummary got = a.summary_at(t);
    EXPECT_EQ(got.solved, expect.solved);
    EXPECT_EQ(got.average_yield, expect.average_yield);
  }
  EXPECT_EQ(a.summary_at(kTauSteps - 1).solved, 3u);
}

TEST(Atlas, AuditCatchesTampering) {
  auto a = sample();
  ASSERT_TRUE(audit_atlas(a).empty());
  auto bad_weight = a;
  bad_weight.subregions[0].default_solution->entries[0].weight += 0.01;
  EXPECT_FALSE(audit_atlas(bad_weight).empty());
  auto bad_summary = a;
  bad_summary.summary.average_yield += 1.0;
  EXPECT_FALSE(audit_atlas(bad_summary).empty());
  auto bad_tau = a;
  for (auto& e : bad_tau.subregions[0].sweep) {
    if (e.solution && e.solution->variability > 0.0) {
      e.solution->tau = e.solution->variability / 2;
      break;
    }
  }
  EXPECT_FALSE(audit_atlas(bad_tau).empty());
}

TEST(Atlas, ParseRejectsBadDocuments) {
  EXPECT_THROW(parse_atlas("{"), ParseError);
  EXPECT_THROW(parse_atlas("{}"), SchemaError);
  auto doc = to_json(sample());
  doc["version"] = kAtlasVersion + 1;
  EXPECT_THROW(atlas_from_json(doc), SchemaError);
  doc = to_json(sample());
  std::swap(doc["subregions"][0], doc["subregions"][1]);
  EXPECT_THROW(atlas_from_json(doc), SchemaError);
  doc = to_json(sample());
  doc["subregions"][0].erase("id");
  EXPECT_THROW(atlas_from_json(doc), SchemaError);
}

TEST(Atlas, SolutionJsonShape) {
  const auto a = sample();
  const auto j = to_json(*a.subregions[0].default_solution, "N1");
  EXPECT_EQ(j.at("sub_region_id"), "N1");
  ASSERT_TRUE(j.contains("entries"));
  EXPECT_TRUE(j.contains("expected_yield"));
  EXPECT_TRUE(j.contains("tau"));
}

}  // namespace
}  // namespace seedmix
