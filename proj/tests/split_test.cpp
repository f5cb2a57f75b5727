#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "seedmix/errors.hpp"
#include "seedmix/split.hpp"

namespace seedmix {
namespace {

std::vector<int> iota_vec(int n) {
  std::vector<int> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), 0);
  return v;
}

TEST(Split, HundredRecords) {
  const auto s = split_dataset(iota_vec(100), SplitRatios{}, 1);
  EXPECT_EQ(s.train.size(), 70u);
  EXPECT_EQ(s.valid.size(), 15u);
  EXPECT_EQ(s.test.size(), 15u);
}

TEST(Split, RemainderGoesToTrain) {
  const auto sizes = split_sizes(10, SplitRatios{});
  EXPECT_EQ(sizes, (std::array<std::size_t, 3>{8, 1, 1}));
}

TEST(Split, Deterministic) {
  const auto a = split_dataset(iota_vec(57), SplitRatios{}, 42);
  const auto b = split_dataset(iota_vec(57), SplitRatios{}, 42);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.valid, b.valid);
  EXPECT_EQ(a.test, b.test);
  const auto c = split_dataset(iota_vec(57), SplitRatios{}, 43);
  EXPECT_NE(a.train, c.train);
}

TEST(Split, PartitionIsExhaustiveAndDisjoint) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const int n = static_cast<int>(seed * 7 % 113);
    const auto s = split_dataset(iota_vec(n), SplitRatios{}, seed);
    std::vector<int> all;
    all.insert(all.end(), s.train.begin(), s.train.end());
    all.insert(all.end(), s.valid.begin(), s.valid.end());
    all.insert(all.end(), s.test.begin(), s.test.end());
    std::sort(all.begin(), all.end());
    EXPECT_EQ(all, iota_vec(n)) << "seed " << seed;
  }
}

TEST(Split, RejectsBadRatios) {
  EXPECT_THROW(split_sizes(10, SplitRatios{0.7, 0.2, 0.2}), ArgumentError);
  EXPECT_THROW(split_sizes(10, SplitRatios{1.0, 0.0, 0.0}), ArgumentError);
  EXPECT_NO_THROW(split_sizes(10, SplitRatios{0.5, 0.25, 0.25}));
}

}  // namespace
}  // namespace seedmix
