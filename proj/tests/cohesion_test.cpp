#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "seedmix/cohesion.hpp"
#include "seedmix/errors.hpp"

namespace seedmix {
namespace {

using testing::make_solution;

SubRegion at(const std::string& id, double lat, double lon) {
  SubRegion r;
  r.id = id;
  r.centroid_lat = lat;
  r.centroid_lon = lon;
  return r;
}

struct Fixture {
  std::map<std::string, PortfolioSolution> solutions;
  SolutionLookup lookup() const {
    return [this](std::string_view id) -> const PortfolioSolution* {
      const auto it = solutions.find(std::string(id));
      return it == solutions.end() ? nullptr : &it->second;
    };
  }
};

Neighborhood hood(std::vector<std::string> ids) { return Neighborhood{"C", 50.0, std::move(ids)}; }

const VarietyId v1{"V1"}, v2{"V2"}, v3{"V3"};

TEST(Haversine, KnownDistances) {
  EXPECT_EQ(haversine_miles({41, -93}, {41, -93}), 0.0);
  const double quarter = std::numbers::pi / 2 * kEarthRadiusMiles;
  EXPECT_NEAR(haversine_miles({0, 0}, {0, 90}), quarter, 1e-9);
  EXPECT_NEAR(haversine_miles({0, 0}, {0, 90}), 6218.0, 1.0);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const GeoPoint a{rng.uniform(-90, 90), rng.uniform(-180, 180)};
    const GeoPoint b{rng.uniform(-90, 90), rng.uniform(-180, 180)};
    EXPECT_DOUBLE_EQ(haversine_miles(a, b), haversine_miles(b, a));
  }
}

TEST(Near, ZeroRadiusAndEverything) {
  RegionMap regions;
  for (int i = 0; i < 5; ++i) regions.emplace("R" + std::to_string(i), at("R" + std::to_string(i), 40 + i, -95 + i));
  EXPECT_TRUE(near(regions, "R2", 0.0).neighbors.empty());
  const auto all = near(regions, "R2", 1e5);
  EXPECT_EQ(all.neighbors, (std::vector<std::string>{"R0", "R1", "R3", "R4"}));
  EXPECT_THROW(near(regions, "R9", 10.0), KeyError);
}

TEST(Near, GridMatchesBruteForce) {
  RegionMap regions;
  const double lat_step = 10.0 / (kEarthRadiusMiles * std::numbers::pi / 180.0);
  for (int row = 0; row < 6; ++row) {
    for (int col = 0; col < 6; ++col) {
      const double lat = 40.0 + row * lat_step;
      const double lon_step = lat_step / std::cos(40.0 * std::numbers::pi / 180.0);
      const std::string id = "G" + std::to_string(row) + std::to_string(col);
      regions.emplace(id, at(id, lat, -95.0 + col * lon_step));
    }
  }
  const auto hoods = all_neighborhoods(regions, 15.0);
  std::size_t i = 0;
  for (const auto& [id, r] : regions) {
    std::vector<std::string> expected;
    for (const auto& [other, o] : regions) {
      if (other == id) continue;
      if (haversine_miles({r.centroid_lat, r.centroid_lon}, {o.centroid_lat, o.centroid_lon}) <= 15.0) {
        expected.push_back(other);
      }
    }
    EXPECT_EQ(near(regions, id, 15.0).neighbors, expected);
    EXPECT_EQ(hoods[i].center, id);
    EXPECT_EQ(hoods[i].neighbors, expected);
    ++i;
  }
  // An interior cell reaches its 4 edge neighbors and the diagonals (~14.1 mi).
  EXPECT_EQ(near(regions, "G22", 11.0).neighbors.size(), 4u);
  EXPECT_EQ(near(regions, "G22", 15.0).neighbors.size(), 8u);
}

TEST(VarietyScore, Examples) {
  Fixture f;
  f.solutions["N1"] = make_solution({{v1, 0.4}, {v2, 0.6}});
  f.solutions["N2"] = make_solution({{v2, 1.0}});
  f.solutions["N3"] = make_solution({{v1, 0.2}, {v2, 0.8}});
  EXPECT_EQ(variety_score(v3, hood({"N1", "N2", "N3"}), f.lookup()), 0.0);
  EXPECT_DOUBLE_EQ(variety_score(v1, hood({"N1", "N2", "N3"}), f.lookup()), 0.2);
  f.solutions["N2"] = make_solution({{v1, 0.4}, {v2, 0.6}});
  f.solutions["N3"] = make_solution({{v1, 0.4}, {v2, 0.6}});
  EXPECT_DOUBLE_EQ(variety_score(v1, hood({"N1", "N2", "N3"}), f.lookup()), 0.4);
  EXPECT_THROW(variety_score(v1, hood({}), f.lookup()), UndefinedScoreError);
}

TEST(VarietyScore, UnsolvedNeighborsCountAsZero) {
  Fixture f;
  f.solutions["N1"] = make_solution({{v1, 0.6}, {v2, 0.4}});
  EXPECT_DOUBLE_EQ(variety_score(v1, hood({"N1", "N2"}), f.lookup()), 0.3);
}

TEST(SpatialCohesion, IdenticalNeighborsGiveOneFifth) {
  Fixture f;
  const auto mix = make_solution({{v1, 0.3}, {v2, 0.3}, {v3, 0.4}});
  f.solutions["N1"] = mix;
  f.solutions["N2"] = mix;
  EXPECT_EQ(sc_score(mix, hood({"N1", "N2"}), f.lookup()), 0.2);
  EXPECT_DOUBLE_EQ(sc_score(mix, hood({"N1", "N2"}), f.lookup(), AverageDivisor::entry_count), 1.0 / 3.0);
}

TEST(SpatialCohesion, DisjointNeighborsGiveZero) {
  Fixture f;
  f.solutions["N1"] = make_solution({{v3, 1.0}});
  EXPECT_EQ(sc_score(make_solution({{v1, 0.5}, {v2, 0.5}}), hood({"N1"}), f.lookup()), 0.0);
}

TEST(SpatialCohesion, HandWorkedExample) {
  Fixture f;
  f.solutions["N1"] = make_solution({{v1, 0.4}, {v3, 0.6}});
  f.solutions["N2"] = make_solution({{v1, 0.2}, {v2, 0.3}, {v3, 0.5}});
  const auto mix = make_solution({{v1, 0.5}, {v2, 0.5}});
  EXPECT_NEAR(variety_score(v1, hood({"N1", "N2"}), f.lookup()), 0.3, 1e-15);
  EXPECT_NEAR(variety_score(v2, hood({"N1", "N2"}), f.lookup()), 0.15, 1e-15);
  EXPECT_NEAR(sc_score(mix, hood({"N1", "N2"}), f.lookup()), 0.09, 1e-12);
}

TEST(SpatialCohesion, InvariantUnderNeighborOrderAndRelabeling) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    Fixture f, relabeled;
    std::vector<std::string> ids;
    const auto random_mix = [&]() {
      std::vector<std::pair<VarietyId, double>> w;
      const int n = 1 + static_cast<int>(rng.below(5));
      double left = 1.0 - 0.1 * n;
      std::vector<int> used;
      for (int j = 0; j < n; ++j) {
        int code;
        do code = static_cast<int>(rng.below(8)); while (std::find(used.begin(), used.end(), code) != used.end());
        used.push_back(code);
        const double extra = j + 1 == n ? left : rng.uniform(0, left);
        left -= extra;
        w.emplace_back(testing::vid(code), 0.1 + extra);
      }
      return w;
    };
    const auto rename = [](std::vector<std::pair<VarietyId, double>> w) {
      for (auto& [v, x] : w) v.code = "X" + v.code;
      return w;
    };
    for (int n = 0; n < 6; ++n) {
      const std::string id = "N" + std::to_string(n);
      ids.push_back(id);
      const auto w = random_mix();
      f.solutions[id] = make_solution(w);
      relabeled.solutions[id] = make_solution(rename(w));
    }
    const auto center = random_mix();
    const double sc = sc_score(make_solution(center), hood(ids), f.lookup());
    EXPECT_GE(sc, 0.0);
    EXPECT_LE(sc, 0.2 + 1e-12);
    auto shuffled = ids;
    rng.shuffle(shuffled);
    EXPECT_NEAR(sc_score(make_solution(center), hood(shuffled), f.lookup()), sc, 1e-15);
    EXPECT_NEAR(sc_score(make_solution(rename(center)), hood(ids), relabeled.lookup()), sc, 1e-15);
  }
}

}  // namespace
}  // namespace seedmix
